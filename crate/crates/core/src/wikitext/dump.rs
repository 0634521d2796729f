//! Page sources: MediaWiki XML export dumps and one-file-per-page directories.

use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use quick_xml::events::Event;
use quick_xml::Reader;

#[derive(Debug, thiserror::Error)]
pub enum DumpError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed XML dump at byte {position}: {message}")]
    Xml { position: u64, message: String },
}

/// One page worth of wikitext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageSource {
    pub title: String,
    pub page_id: u64,
    pub wikitext: String,
}

/// Reads every article page of a MediaWiki XML export. Pages outside the main
/// namespace and redirects are skipped.
pub fn read_xml_dump<R: BufRead>(input: R) -> Result<Vec<PageSource>, DumpError> {
    let mut reader = Reader::from_reader(input);
    let mut buf = Vec::new();
    let mut pages = Vec::new();

    let mut path: Vec<String> = Vec::new();
    let mut page = PageFields::default();
    loop {
        let event = reader.read_event_into(&mut buf).map_err(|e| DumpError::Xml {
            position: reader.buffer_position(),
            message: e.to_string(),
        })?;
        match event {
            Event::Start(e) => {
                let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                if name == "page" {
                    page = PageFields::default();
                }
                path.push(name);
            }
            Event::Empty(e) => {
                if e.local_name().as_ref() == b"redirect" && path.last().is_some_and(|p| p == "page") {
                    page.redirect = true;
                }
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| DumpError::Xml {
                    position: reader.buffer_position(),
                    message: e.to_string(),
                })?;
                page.accept(&path, &text);
            }
            Event::CData(t) => {
                let text = String::from_utf8_lossy(&t).into_owned();
                page.accept(&path, &text);
            }
            Event::End(e) => {
                path.pop();
                if e.local_name().as_ref() == b"page" {
                    if let Some(source) = std::mem::take(&mut page).into_source() {
                        pages.push(source);
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    Ok(pages)
}

#[derive(Debug, Default)]
struct PageFields {
    title: String,
    id: Option<u64>,
    ns: Option<i64>,
    text: String,
    redirect: bool,
}

impl PageFields {
    fn accept(&mut self, path: &[String], text: &str) {
        let tail: Vec<&str> = path.iter().rev().take(2).map(String::as_str).collect();
        match tail.as_slice() {
            ["title", "page"] => self.title.push_str(text),
            ["ns", "page"] => self.ns = text.trim().parse().ok(),
            ["id", "page"] => self.id = text.trim().parse().ok(),
            ["text", "revision"] => self.text.push_str(text),
            _ => {}
        }
    }

    fn into_source(self) -> Option<PageSource> {
        if self.redirect || self.ns.is_some_and(|ns| ns != 0) {
            return None;
        }
        if self.text.trim_start().to_ascii_uppercase().starts_with("#REDIRECT") {
            return None;
        }
        Some(PageSource { title: self.title, page_id: self.id.unwrap_or(0), wikitext: self.text })
    }
}

/// Reads a directory of `*.wiki` / `*.txt` files, one page per file. The title
/// is the file stem with underscores as spaces; page ids follow sorted file
/// name order starting at 1.
pub fn read_page_dir(dir: &Path) -> Result<Vec<PageSource>, DumpError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DumpError::Io { path, source }
    };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && matches!(p.extension().and_then(|e| e.to_str()), Some("wiki" | "txt")))
        .collect();
    files.sort();
    files
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let wikitext = fs::read_to_string(path).map_err(io_err(path))?;
            let title = path
                .file_stem()
                .map(|s| s.to_string_lossy().replace('_', " "))
                .unwrap_or_default();
            Ok(PageSource { title, page_id: i as u64 + 1, wikitext })
        })
        .collect()
}

/// Reads either kind of source, deciding by whether `path` is a directory.
pub fn read_pages(path: &Path) -> Result<Vec<PageSource>, DumpError> {
    if path.is_dir() {
        read_page_dir(path)
    } else {
        let file = fs::File::open(path).map_err(|source| DumpError::Io { path: path.into(), source })?;
        read_xml_dump(std::io::BufReader::new(file))
    }
}

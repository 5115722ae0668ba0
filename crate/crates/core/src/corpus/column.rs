//! Whitespace-separated `form pos tag` files, one token per line and a
//! blank line between sentences.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{bio, Corpus, Sentence, TaskKind, Token};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default)]
pub struct ColumnOptions {
    /// Reject orphan `I-X` tags instead of rewriting them to `B-X`.
    pub strict: bool,
}

pub fn load_column_tagging(path: impl AsRef<Path>, options: ColumnOptions) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_column_tagging(BufReader::new(file), &path.display().to_string(), options)
}

pub fn read_column_tagging<R: BufRead>(reader: R, source: &str, options: ColumnOptions) -> Result<Corpus> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut repaired = 0;

    let mut finish = |tokens: &mut Vec<Token>, sentences: &mut Vec<Sentence>| -> Result<()> {
        if tokens.is_empty() {
            return Ok(());
        }
        let id = format!("s{}", sentences.len() + 1);
        let mut tags: Vec<String> = tokens
            .iter()
            .map(|t| t.gold.tag().unwrap_or_default().to_string())
            .collect();
        if !options.strict {
            repaired += bio::repair(&mut tags);
            for (tok, tag) in tokens.iter_mut().zip(tags) {
                tok.gold = super::Gold::Tag(tag);
            }
        }
        let sentence = Sentence::new(id, std::mem::take(tokens));
        sentence.validate(TaskKind::Tagging)?;
        sentences.push(sentence);
        Ok(())
    };

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            finish(&mut tokens, &mut sentences)?;
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: source.to_string(),
                line: lineno + 1,
                message: format!("expected 3 columns (form pos tag), found {}", fields.len()),
            });
        }
        if bio::parse_tag(fields[2]).is_none() {
            return Err(Error::Parse {
                path: source.to_string(),
                line: lineno + 1,
                message: format!("invalid BIO tag {:?}", fields[2]),
            });
        }
        tokens.push(Token::tagged(fields[0], fields[1], fields[2]));
    }
    finish(&mut tokens, &mut sentences)?;

    if repaired > 0 {
        log::warn!("{source}: repaired {repaired} orphan I- tags");
    }
    if sentences.is_empty() {
        log::warn!("{source}: no sentences found");
    }
    Ok(Corpus::new(TaskKind::Tagging, sentences))
}

pub fn write_column_tagging<W: Write>(corpus: &Corpus, mut writer: W) -> Result<()> {
    let io_err = |e| Error::io("<writer>", e);
    for (i, sentence) in corpus.sentences.iter().enumerate() {
        if i > 0 {
            writeln!(writer).map_err(io_err)?;
        }
        for tok in &sentence.tokens {
            let tag = tok
                .gold
                .tag()
                .ok_or_else(|| Error::validation(&sentence.id, "column format requires BIO tags"))?;
            writeln!(writer, "{} {} {}", tok.form, tok.pos, tag).map_err(io_err)?;
        }
    }
    Ok(())
}

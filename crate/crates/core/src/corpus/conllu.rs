//! CoNLL-U reader and writer. Multiword-token ranges (`1-2`) and empty
//! nodes (`1.1`) are skipped.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{Corpus, Sentence, TaskKind, Token};
use crate::error::{Error, Result};

pub fn load_conllu(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_conllu(BufReader::new(file), &path.display().to_string())
}

pub fn read_conllu<R: BufRead>(reader: R, source: &str) -> Result<Corpus> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut sent_id: Option<String> = None;

    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };

    let finish = |tokens: &mut Vec<Token>, sent_id: &mut Option<String>, sentences: &mut Vec<Sentence>| -> Result<()> {
        if tokens.is_empty() {
            *sent_id = None;
            return Ok(());
        }
        let id = sent_id.take().unwrap_or_else(|| format!("s{}", sentences.len() + 1));
        let sentence = Sentence::new(id, std::mem::take(tokens));
        sentence.validate(TaskKind::Parsing)?;
        let roots = sentence.gold_heads().iter().filter(|&&h| h == 0).count();
        if roots != 1 {
            return Err(Error::validation(
                &sentence.id,
                format!("expected exactly one root, found {roots}"),
            ));
        }
        sentences.push(sentence);
        Ok(())
    };

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            finish(&mut tokens, &mut sent_id, &mut sentences)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "sent_id" {
                    sent_id = Some(value.trim().to_string());
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(parse_err(
                lineno + 1,
                format!("expected 10 tab-separated columns, found {}", fields.len()),
            ));
        }
        if fields[0].contains('-') || fields[0].contains('.') {
            continue;
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(lineno + 1, format!("invalid token id {:?}", fields[0])))?;
        if id != tokens.len() + 1 {
            return Err(parse_err(
                lineno + 1,
                format!("token id {id} out of sequence, expected {}", tokens.len() + 1),
            ));
        }
        let head: usize = fields[6]
            .parse()
            .map_err(|_| parse_err(lineno + 1, format!("invalid head {:?}", fields[6])))?;
        tokens.push(Token::dep(fields[1], fields[3], head, fields[7]));
    }
    finish(&mut tokens, &mut sent_id, &mut sentences)?;

    if sentences.is_empty() {
        log::warn!("{source}: no sentences found");
    }
    Ok(Corpus::new(TaskKind::Parsing, sentences))
}

pub fn write_conllu<W: Write>(corpus: &Corpus, mut writer: W) -> Result<()> {
    let io_err = |e| Error::io("<writer>", e);
    for sentence in &corpus.sentences {
        writeln!(writer, "# sent_id = {}", sentence.id).map_err(io_err)?;
        for (i, tok) in sentence.tokens.iter().enumerate() {
            let (head, label) = match &tok.gold {
                super::Gold::Dep { head, label } => (*head, label.as_str()),
                super::Gold::Tag(_) => return Err(Error::validation(&sentence.id, "CoNLL-U requires heads")),
            };
            writeln!(
                writer,
                "{}\t{}\t_\t{}\t_\t_\t{}\t{}\t_\t_",
                i + 1,
                tok.form,
                tok.pos,
                head,
                label
            )
            .map_err(io_err)?;
        }
        writeln!(writer).map_err(io_err)?;
    }
    Ok(())
}

//! Built-in problem files for the worked examples.

use thiserror::Error;

use crate::parser::{parse_problem, ParseError, Problem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("no corpus problem named `{0}`")]
    Unknown(String),
    #[error("corpus problem `{name}`: {err}")]
    Parse { name: String, err: ParseError },
}

macro_rules! corpus_files {
    ($($name:literal),* $(,)?) => {
        const FILES: &[(&str, &str)] = &[$(($name, include_str!(concat!("../../../corpus/", $name, ".prob")))),*];
    };
}

corpus_files!(
    "heat_cole_hopf",
    "mkdv_miura",
    "kdv_abt",
    "kdv_darboux",
    "sine_gordon",
    "short_pulse",
    "camassa_holm",
    "harry_dym",
    "cnls",
    "tzitzeica",
    "broken",
);

/// Names of the built-in problems, the deliberately broken fixture last.
pub fn names() -> impl Iterator<Item = &'static str> {
    FILES.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    FILES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Result<Problem, CorpusError> {
    let text = source(name).ok_or_else(|| CorpusError::Unknown(name.to_string()))?;
    parse_problem(text).map_err(|err| CorpusError::Parse { name: name.to_string(), err })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_file_parses() {
        for n in names() {
            if let Err(e) = load(n) {
                panic!("{e}");
            }
        }
        assert_eq!(names().count(), 11);
        assert!(matches!(load("nope"), Err(CorpusError::Unknown(_))));
    }
}

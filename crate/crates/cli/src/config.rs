//! Flat INI-style run configuration: one section per subcommand, every key
//! overridable from the command line. Each run writes its fully resolved
//! section next to its outputs so the run can be reproduced from that file
//! alone.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rmfn_core::{Error, Result};

#[derive(Default)]
pub struct IniFile {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl IniFile {
    pub fn load(path: &Path) -> Result<IniFile> {
        let text = fs::read_to_string(path)?;
        IniFile::parse(&text)
    }

    pub fn parse(text: &str) -> Result<IniFile> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    record: idx + 1,
                    msg: format!("expected 'key = value', found '{raw}'"),
                });
            };
            if current.is_empty() {
                return Err(Error::Parse {
                    record: idx + 1,
                    msg: "key outside any [section]".into(),
                });
            }
            sections
                .get_mut(&current)
                .expect("section inserted above")
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(IniFile { sections })
    }

    pub fn section(&self, name: &str) -> Section<'_> {
        Section {
            name: name.to_string(),
            entries: self.sections.get(name),
        }
    }
}

pub struct Section<'a> {
    name: String,
    entries: Option<&'a BTreeMap<String, String>>,
}

impl Section<'_> {
    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.and_then(|m| m.get(key)).map(|s| s.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(text) => text.parse::<T>().map(Some).map_err(|e| {
                Error::Config(format!("[{}] {key} = {text}: {e}", self.name))
            }),
        }
    }
}

/// Resolution order: command line beats config file beats default.
pub fn pick<T>(cli: Option<T>, file: Option<T>, default: T) -> T {
    cli.or(file).unwrap_or(default)
}

/// Write the fully resolved key-value section next to the run outputs.
pub fn write_resolved(path: &Path, section: &str, pairs: &[(&str, String)]) -> Result<()> {
    let mut text = format!("[{section}]\n");
    for (key, value) in pairs {
        text.push_str(&format!("{key} = {value}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_keys_and_comments() {
        let ini = IniFile::parse(
            "# comment\n[gen]\nn = 100\nseq_len = 8\n\n[train]\nlr = 0.01\n; other\n",
        )
        .unwrap();
        assert_eq!(ini.section("gen").get::<usize>("n").unwrap(), Some(100));
        assert_eq!(ini.section("train").get::<f64>("lr").unwrap(), Some(0.01));
        assert_eq!(ini.section("train").get::<usize>("missing").unwrap(), None);
        assert!(ini.section("gen").get::<usize>("seq_len").unwrap() == Some(8));
    }

    #[test]
    fn rejects_keys_outside_sections_and_bad_lines() {
        assert!(IniFile::parse("n = 3\n").is_err());
        assert!(IniFile::parse("[gen]\njust words\n").is_err());
        assert!(matches!(
            IniFile::parse("[gen]\nn = x\n")
                .unwrap()
                .section("gen")
                .get::<usize>("n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn pick_prefers_cli_then_file() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick::<usize>(None, None, 3), 3);
    }
}

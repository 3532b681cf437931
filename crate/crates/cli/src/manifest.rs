use std::fmt::Display;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ifm_core::kv::KvDocument;
use sha2::{Digest, Sha256};

use crate::output::{with_suffix, write_file};

/// Provenance record written beside every output file: the command line,
/// resolved parameters, seed, and SHA-256 digests of inputs and outputs.
pub struct RunManifest {
    command: &'static str,
    argv: Vec<String>,
    seed: Option<u64>,
    params: Vec<(String, String)>,
    inputs: Vec<(String, String)>,
    outputs: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &'static str, argv: &[String]) -> Self {
        Self {
            command,
            argv: argv.to_vec(),
            seed: None,
            params: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self
    }

    pub fn param(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.inputs
            .push((path.display().to_string(), sha256(&bytes)));
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    /// Records a built-in input that has no file.
    pub fn builtin_input(&mut self, name: &str, contents: &str) {
        self.inputs
            .push((format!("{BUILTIN}{name}"), sha256(contents.as_bytes())));
    }

    /// Writes an output file and records its digest.
    pub fn write_output(&mut self, path: &Path, text: &str) -> Result<()> {
        write_file(path, text)?;
        self.outputs
            .push((path.display().to_string(), sha256(text.as_bytes())));
        Ok(())
    }

    pub fn to_kv(&self) -> KvDocument {
        let mut doc = KvDocument::new();
        doc.push("command", self.command);
        doc.push("version", env!("CARGO_PKG_VERSION"));
        for (i, word) in self.argv.iter().enumerate() {
            doc.push(&format!("argv.{i}"), word.as_str());
        }
        if let Some(seed) = self.seed {
            doc.push_u64("seed", seed);
        }
        for (k, v) in &self.params {
            doc.push(&format!("param.{k}"), v.as_str());
        }
        for (kind, list) in [("input", &self.inputs), ("output", &self.outputs)] {
            for (i, (path, digest)) in list.iter().enumerate() {
                doc.push(&format!("{kind}.{i}.path"), path.as_str());
                doc.push(&format!("{kind}.{i}.sha256"), digest.as_str());
            }
        }
        doc
    }

    pub fn write_beside(&self, output: &Path) -> Result<()> {
        write_file(&with_suffix(output, ".manifest"), &self.to_kv().to_string())
    }
}

const BUILTIN: &str = "builtin:";

pub fn sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// A parsed manifest, as needed to replay its run.
pub struct Recorded {
    pub argv: Vec<String>,
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<(String, String)>,
}

impl Recorded {
    pub fn parse(text: &str) -> Result<Self> {
        let doc = KvDocument::parse(text)?;
        let argv: Vec<String> = (0..)
            .map_while(|i| doc.get(&format!("argv.{i}")).map(String::from))
            .collect();
        if argv.len() < 2 {
            bail!("manifest has no recorded command line");
        }
        let list = |kind: &str| -> Vec<(String, String)> {
            (0..)
                .map_while(|i| {
                    let path = doc.get(&format!("{kind}.{i}.path"))?;
                    let digest = doc.get(&format!("{kind}.{i}.sha256"))?;
                    Some((path.to_string(), digest.to_string()))
                })
                .collect()
        };
        Ok(Self {
            argv,
            inputs: list("input"),
            outputs: list("output"),
        })
    }

    /// Fails if an input file changed since the recorded run. Built-in
    /// inputs are checked against the running binary.
    pub fn check_inputs(&self, builtin: impl Fn(&str) -> Option<&'static str>) -> Result<()> {
        for (path, digest) in &self.inputs {
            let actual = match path.strip_prefix(BUILTIN) {
                Some(name) => match builtin(name) {
                    Some(contents) => sha256(contents.as_bytes()),
                    None => bail!("unknown built-in input `{name}`"),
                },
                None => {
                    sha256(&fs::read(path).with_context(|| format!("cannot read input {path}"))?)
                }
            };
            if &actual != digest {
                bail!("input {path} differs from the recorded run");
            }
        }
        Ok(())
    }

    /// Outputs whose current contents differ from the recorded digests.
    pub fn changed_outputs(&self) -> Vec<String> {
        self.outputs
            .iter()
            .filter(|(path, digest)| {
                fs::read(path)
                    .map(|b| &sha256(&b) != digest)
                    .unwrap_or(true)
            })
            .map(|(path, _)| path.clone())
            .collect()
    }
}

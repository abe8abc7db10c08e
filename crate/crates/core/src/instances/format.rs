//! Line-delimited JSON interchange format.
//!
//! A file is a sequence of records, one JSON object per line, each tagged by
//! its `record` field. An instance is a `header` followed by exactly the
//! number of `node`, `edge`, `hop1` and `hop2` records the header announces
//! (in that order) and, when `truth` is set, one `truth` record. A dataset
//! file starts with a `dataset` record and then holds its instances back to
//! back. Blank lines are ignored; unknown records or fields are errors.
//!
//! ```text
//! {"record":"dataset","instances":2,"train":[0],"validation":[1]}
//! {"record":"header","nodes":4,"labels":2,"features":5,"hypercolumn_dim":2,"edges":4,"hop1":1,"hop2":0,"truth":true,"pairwise_alpha":0.5,"pairwise_beta":1.5}
//! {"record":"node","id":0,"features":[...],"hypercolumn":[...],"unary":[...]}
//! {"record":"edge","a":0,"b":1}
//! {"record":"hop1","members":[0,1],"label":1,"confidence":0.9,"weight":0.4}
//! {"record":"hop2","members":[2,3],"label":0,"penalty":2.0,"divisor":2.0}
//! {"record":"truth","labels":[0,1,1,0]}
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crf::{CrfInstance, Hop1Clique, Hop2Clique, InstanceParts, Labeling, PairwiseGate};
use crate::error::{Error, Result};

use super::Dataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case", deny_unknown_fields)]
enum Record {
    Dataset {
        instances: usize,
        train: Vec<usize>,
        validation: Vec<usize>,
    },
    Header {
        nodes: usize,
        labels: usize,
        features: usize,
        hypercolumn_dim: usize,
        edges: usize,
        hop1: usize,
        hop2: usize,
        truth: bool,
        pairwise_alpha: f64,
        pairwise_beta: f64,
    },
    Node {
        id: usize,
        features: Vec<f64>,
        hypercolumn: Vec<f64>,
        unary: Vec<f64>,
    },
    Edge {
        a: usize,
        b: usize,
    },
    Hop1 {
        members: Vec<usize>,
        label: usize,
        confidence: f64,
        weight: f64,
    },
    Hop2 {
        members: Vec<usize>,
        label: usize,
        penalty: f64,
        divisor: f64,
    },
    Truth {
        labels: Vec<usize>,
    },
}

impl Record {
    fn kind(&self) -> &'static str {
        match self {
            Record::Dataset { .. } => "dataset",
            Record::Header { .. } => "header",
            Record::Node { .. } => "node",
            Record::Edge { .. } => "edge",
            Record::Hop1 { .. } => "hop1",
            Record::Hop2 { .. } => "hop2",
            Record::Truth { .. } => "truth",
        }
    }
}

fn write_record(out: &mut Vec<u8>, record: &Record) -> Result<()> {
    serde_json::to_writer(&mut *out, record).map_err(|e| Error::Format(e.to_string()))?;
    out.push(b'\n');
    Ok(())
}

fn encode_instance(out: &mut Vec<u8>, instance: &CrfInstance, truth: Option<&Labeling>) -> Result<()> {
    let parts = instance.parts();
    write_record(
        out,
        &Record::Header {
            nodes: instance.num_nodes(),
            labels: instance.num_labels(),
            features: instance.num_features(),
            hypercolumn_dim: instance.hypercolumn_dim(),
            edges: parts.edges.len(),
            hop1: parts.hop1.len(),
            hop2: parts.hop2.len(),
            truth: truth.is_some(),
            pairwise_alpha: parts.gate.alpha,
            pairwise_beta: parts.gate.beta,
        },
    )?;
    for i in 0..instance.num_nodes() {
        write_record(
            out,
            &Record::Node {
                id: i,
                features: parts.node_features[i].clone(),
                hypercolumn: parts.hypercolumns[i].clone(),
                unary: parts.unary[i].clone(),
            },
        )?;
    }
    for &(a, b) in &parts.edges {
        write_record(out, &Record::Edge { a, b })?;
    }
    for c in &parts.hop1 {
        write_record(
            out,
            &Record::Hop1 {
                members: c.members.clone(),
                label: c.label,
                confidence: c.confidence,
                weight: c.weight,
            },
        )?;
    }
    for c in &parts.hop2 {
        write_record(
            out,
            &Record::Hop2 {
                members: c.members.clone(),
                label: c.label,
                penalty: c.penalty,
                divisor: c.divisor,
            },
        )?;
    }
    if let Some(t) = truth {
        t.validate(instance)?;
        write_record(out, &Record::Truth { labels: t.to_complete()? })?;
    }
    Ok(())
}

/// Serializes one instance (and optional ground truth) to a string.
pub fn instance_to_string(instance: &CrfInstance, truth: Option<&Labeling>) -> Result<String> {
    let mut out = Vec::new();
    encode_instance(&mut out, instance, truth)?;
    Ok(String::from_utf8(out).expect("json is utf-8"))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn save_instance(path: &Path, instance: &CrfInstance, truth: Option<&Labeling>) -> Result<()> {
    write_file(path, instance_to_string(instance, truth)?.as_bytes())
}

pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut out = Vec::new();
    write_record(
        &mut out,
        &Record::Dataset {
            instances: dataset.len(),
            train: dataset.train.clone(),
            validation: dataset.validation.clone(),
        },
    )?;
    for (inst, truth) in &dataset.items {
        encode_instance(&mut out, inst, Some(truth))?;
    }
    write_file(path, &out)
}

/// Record cursor that remembers line numbers for error messages.
struct Reader<'a> {
    path: &'a Path,
    lines: Vec<(usize, Record)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Reader<'a> {
    fn parse(path: &'a Path, text: &str) -> Result<Self> {
        let mut lines = Vec::new();
        let mut last_line = 0;
        for (k, line) in text.lines().enumerate() {
            last_line = k + 1;
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: k + 1,
                msg: e.to_string(),
            })?;
            lines.push((k + 1, record));
        }
        Ok(Self {
            path,
            lines,
            pos: 0,
            last_line,
        })
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.lines.len()
    }

    fn next(&mut self, expected: &str) -> Result<(usize, Record)> {
        match self.lines.get(self.pos) {
            Some(r) => {
                self.pos += 1;
                Ok(r.clone())
            }
            None => Err(self.err(
                self.last_line + 1,
                format!("unexpected end of file: expected a `{expected}` record (file truncated?)"),
            )),
        }
    }

    fn expect_kind(&self, line: usize, record: &Record, expected: &str) -> Result<()> {
        if record.kind() == expected {
            Ok(())
        } else {
            Err(self.err(line, format!("expected a `{expected}` record, found `{}`", record.kind())))
        }
    }

    fn read_instance(&mut self) -> Result<(CrfInstance, Option<Labeling>)> {
        let (line, header) = self.next("header")?;
        let Record::Header {
            nodes,
            labels,
            features,
            hypercolumn_dim,
            edges,
            hop1,
            hop2,
            truth,
            pairwise_alpha,
            pairwise_beta,
        } = header
        else {
            return Err(self.err(line, format!("expected a `header` record, found `{}`", header.kind())));
        };
        let mut parts = InstanceParts {
            num_labels: labels,
            edges: Vec::with_capacity(edges),
            node_features: Vec::with_capacity(nodes),
            hypercolumns: Vec::with_capacity(nodes),
            unary: Vec::with_capacity(nodes),
            gate: PairwiseGate {
                alpha: pairwise_alpha,
                beta: pairwise_beta,
            },
            hop1: Vec::with_capacity(hop1),
            hop2: Vec::with_capacity(hop2),
        };
        for i in 0..nodes {
            let (line, r) = self.next("node")?;
            self.expect_kind(line, &r, "node")?;
            let Record::Node {
                id,
                features: b,
                hypercolumn,
                unary,
            } = r
            else {
                unreachable!()
            };
            if id != i {
                return Err(self.err(line, format!("field `id`: expected node {i}, found {id}")));
            }
            if b.len() != features {
                return Err(self.err(line, format!("field `features`: expected {features} values, found {}", b.len())));
            }
            if hypercolumn.len() != hypercolumn_dim {
                return Err(self.err(
                    line,
                    format!("field `hypercolumn`: expected {hypercolumn_dim} values, found {}", hypercolumn.len()),
                ));
            }
            if unary.len() != labels {
                return Err(self.err(line, format!("field `unary`: expected {labels} values, found {}", unary.len())));
            }
            parts.node_features.push(b);
            parts.hypercolumns.push(hypercolumn);
            parts.unary.push(unary);
        }
        for _ in 0..edges {
            let (line, r) = self.next("edge")?;
            self.expect_kind(line, &r, "edge")?;
            let Record::Edge { a, b } = r else { unreachable!() };
            parts.edges.push((a, b));
        }
        for _ in 0..hop1 {
            let (line, r) = self.next("hop1")?;
            self.expect_kind(line, &r, "hop1")?;
            let Record::Hop1 {
                members,
                label,
                confidence,
                weight,
            } = r
            else {
                unreachable!()
            };
            parts.hop1.push(Hop1Clique {
                members,
                label,
                confidence,
                weight,
            });
        }
        for _ in 0..hop2 {
            let (line, r) = self.next("hop2")?;
            self.expect_kind(line, &r, "hop2")?;
            let Record::Hop2 {
                members,
                label,
                penalty,
                divisor,
            } = r
            else {
                unreachable!()
            };
            parts.hop2.push(Hop2Clique {
                members,
                label,
                penalty,
                divisor,
            });
        }
        let instance = CrfInstance::new(parts).map_err(|e| self.err(line, format!("instance starting here: {e}")))?;
        let truth = if truth {
            let (tline, r) = self.next("truth")?;
            self.expect_kind(tline, &r, "truth")?;
            let Record::Truth { labels: t } = r else { unreachable!() };
            if t.len() != nodes {
                return Err(self.err(tline, format!("field `labels`: expected {nodes} values, found {}", t.len())));
            }
            let labeling = Labeling::from_labels(&t);
            labeling.validate(&instance).map_err(|e| self.err(tline, format!("field `labels`: {e}")))?;
            Some(labeling)
        } else {
            None
        };
        Ok((instance, truth))
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses every instance in `text`. A leading `dataset` record is skipped.
pub fn parse_instances(path: &Path, text: &str) -> Result<Vec<(CrfInstance, Option<Labeling>)>> {
    let mut reader = Reader::parse(path, text)?;
    if let Some((_, Record::Dataset { .. })) = reader.lines.first() {
        reader.pos = 1;
    }
    let mut out = Vec::new();
    while !reader.at_end() {
        out.push(reader.read_instance()?);
    }
    Ok(out)
}

/// Loads a file that must contain exactly one instance.
pub fn load_instance(path: &Path) -> Result<(CrfInstance, Option<Labeling>)> {
    let mut all = parse_instances(path, &read_text(path)?)?;
    if all.len() != 1 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("expected exactly one instance, found {}", all.len()),
        });
    }
    Ok(all.pop().expect("one instance"))
}

/// Loads every instance of an instance or dataset file.
pub fn load_instances(path: &Path) -> Result<Vec<(CrfInstance, Option<Labeling>)>> {
    parse_instances(path, &read_text(path)?)
}

pub fn parse_dataset(path: &Path, text: &str) -> Result<Dataset> {
    let mut reader = Reader::parse(path, text)?;
    let (line, first) = reader.next("dataset")?;
    let Record::Dataset {
        instances,
        train,
        validation,
    } = first
    else {
        return Err(reader.err(line, format!("expected a `dataset` record, found `{}`", first.kind())));
    };
    let mut items = Vec::with_capacity(instances);
    for k in 0..instances {
        let start = reader.lines.get(reader.pos).map_or(reader.last_line + 1, |l| l.0);
        let (inst, truth) = reader.read_instance()?;
        let truth = truth.ok_or_else(|| reader.err(start, format!("dataset instance {k} has no ground truth")))?;
        items.push((inst, truth));
    }
    if let Some((line, r)) = reader.lines.get(reader.pos) {
        return Err(reader.err(*line, format!("unexpected `{}` record after the last announced instance", r.kind())));
    }
    Dataset::new(items, train, validation).map_err(|e| reader.err(line, e.to_string()))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(path, &read_text(path)?)
}

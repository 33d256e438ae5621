//! Line-oriented text format for graphs and rotation estimates.
//!
//! ```text
//! # comment
//! N <n_vertices>
//! VERTEX_GT <id> <r00 r01 r02 r10 r11 r12 r20 r21 r22>
//! EDGE <i> <j> <r00 ... r22> <confidence>
//! ```
//!
//! `N` must come first; the remaining records may appear in any order.
//! Estimate files use the same layout with `VERTEX_EST` records. Floats are
//! written with 17 significant digits so a write/read cycle is bit-exact.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use crate::error::{invalid, Error, Result};
use crate::graph::{check_edge, Edge, EdgeSource, EpipolarConfidenceGraph, GraphBuilder};
use crate::so3::Rotation;

#[derive(Debug, Clone, PartialEq)]
enum Record {
    Count(usize),
    GroundTruth(usize, [f64; 9]),
    Estimate(usize, [f64; 9]),
    Edge(usize, usize, [f64; 9], f64),
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_record(line_no: usize, raw: &str) -> Result<Option<Record>> {
    let content = raw.split('#').next().unwrap_or("");
    let mut tokens = content.split_whitespace();
    let Some(tag) = tokens.next() else {
        return Ok(None);
    };
    let rest: Vec<&str> = tokens.collect();
    let expect = |count: usize| -> Result<()> {
        if rest.len() != count {
            Err(parse_error(
                line_no,
                format!("{tag} expects {count} fields, found {}", rest.len()),
            ))
        } else {
            Ok(())
        }
    };
    let index = |s: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| parse_error(line_no, format!("invalid vertex index {s:?}")))
    };
    let float = |s: &str| -> Result<f64> {
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(parse_error(line_no, format!("invalid number {s:?}"))),
        }
    };
    let matrix = |fields: &[&str]| -> Result<[f64; 9]> {
        let mut m = [0.0; 9];
        for (slot, s) in m.iter_mut().zip(fields) {
            *slot = float(s)?;
        }
        Ok(m)
    };
    let record = match tag {
        "N" => {
            expect(1)?;
            Record::Count(index(rest[0])?)
        }
        "VERTEX_GT" => {
            expect(10)?;
            Record::GroundTruth(index(rest[0])?, matrix(&rest[1..])?)
        }
        "VERTEX_EST" => {
            expect(10)?;
            Record::Estimate(index(rest[0])?, matrix(&rest[1..])?)
        }
        "EDGE" => {
            expect(12)?;
            Record::Edge(
                index(rest[0])?,
                index(rest[1])?,
                matrix(&rest[2..11])?,
                float(rest[11])?,
            )
        }
        other => return Err(parse_error(line_no, format!("unknown record {other:?}"))),
    };
    Ok(Some(record))
}

/// Attaches the line number to semantic errors raised while reading a record.
fn at_line(line: usize, err: Error) -> Error {
    match err {
        Error::InvalidArgument(msg) => Error::InvalidArgument(format!("line {line}: {msg}")),
        other => other,
    }
}

fn rotation_at(line: usize, m: &[f64; 9]) -> Result<Rotation> {
    Rotation::from_row_slice(m).map_err(|e| at_line(line, e))
}

/// Tracks the mandatory leading `N` record.
struct Header {
    n: Option<usize>,
}

impl Header {
    fn accept(&mut self, line: usize, record: &Record) -> Result<Option<usize>> {
        match (record, self.n) {
            (Record::Count(_), Some(_)) => Err(parse_error(line, "duplicate N record")),
            (Record::Count(n), None) => {
                self.n = Some(*n);
                Ok(None)
            }
            (_, None) => Err(parse_error(line, "N must precede all other records")),
            (_, Some(n)) => Ok(Some(n)),
        }
    }
}

fn for_each_record<R: BufRead>(
    reader: R,
    mut f: impl FnMut(usize, Record) -> Result<()>,
) -> Result<()> {
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if let Some(record) = parse_record(line_no, &line)? {
            f(line_no, record)?;
        }
    }
    Ok(())
}

fn read_graph_from<R: BufRead>(reader: R) -> Result<EpipolarConfidenceGraph> {
    let mut header = Header { n: None };
    let mut builder: Option<GraphBuilder> = None;
    for_each_record(reader, |line, record| {
        if header.accept(line, &record)?.is_none() {
            let Record::Count(n) = record else { unreachable!() };
            builder = Some(GraphBuilder::new(n).map_err(|e| at_line(line, e))?);
            return Ok(());
        }
        let b = builder.as_mut().expect("header seen");
        match record {
            Record::GroundTruth(id, m) => b
                .set_ground_truth(id, rotation_at(line, &m)?)
                .map_err(|e| at_line(line, e)),
            Record::Edge(i, j, m, c) => b
                .add_edge(Edge::new(i, j, rotation_at(line, &m)?, c))
                .map_err(|e| at_line(line, e)),
            Record::Estimate(..) => Err(parse_error(line, "VERTEX_EST is not allowed in a graph file")),
            Record::Count(_) => unreachable!(),
        }
    })?;
    match builder {
        Some(b) => b.finish(),
        None => Err(parse_error(0, "missing N record")),
    }
}

pub fn parse_graph(text: &str) -> Result<EpipolarConfidenceGraph> {
    read_graph_from(text.as_bytes())
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<EpipolarConfidenceGraph> {
    read_graph_from(BufReader::new(File::open(path)?))
}

fn push_floats(out: &mut String, values: &[f64]) {
    for v in values {
        write!(out, " {v:.16e}").unwrap();
    }
}

pub fn serialize_graph(g: &EpipolarConfidenceGraph) -> String {
    let mut out = String::new();
    writeln!(out, "N {}", g.n_vertices()).unwrap();
    if let Some(gt) = g.ground_truth() {
        for (id, r) in gt.iter().enumerate() {
            write!(out, "VERTEX_GT {id}").unwrap();
            push_floats(&mut out, &r.to_row_array());
            out.push('\n');
        }
    }
    for e in g.edges() {
        write!(out, "EDGE {} {}", e.i, e.j).unwrap();
        push_floats(&mut out, &e.rotation.to_row_array());
        push_floats(&mut out, &[e.confidence]);
        out.push('\n');
    }
    out
}

pub fn write_graph(g: &EpipolarConfidenceGraph, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, serialize_graph(g))?;
    Ok(())
}

pub fn serialize_estimates(rotations: &[Rotation]) -> String {
    let mut out = String::new();
    writeln!(out, "N {}", rotations.len()).unwrap();
    for (id, r) in rotations.iter().enumerate() {
        write!(out, "VERTEX_EST {id}").unwrap();
        push_floats(&mut out, &r.to_row_array());
        out.push('\n');
    }
    out
}

/// Reads a `VERTEX_EST` file; every vertex in `0..N` must be present exactly once.
pub fn parse_estimates(text: &str) -> Result<Vec<Rotation>> {
    let mut header = Header { n: None };
    let mut slots: Vec<Option<Rotation>> = Vec::new();
    for_each_record(text.as_bytes(), |line, record| {
        let Some(n) = header.accept(line, &record)? else {
            let Record::Count(n) = record else { unreachable!() };
            slots = vec![None; n];
            return Ok(());
        };
        match record {
            Record::Estimate(id, m) => {
                if id >= n {
                    return Err(invalid(format!("line {line}: vertex {id} out of range for {n} vertices")));
                }
                if slots[id].replace(rotation_at(line, &m)?).is_some() {
                    return Err(invalid(format!("line {line}: estimate for vertex {id} given twice")));
                }
                Ok(())
            }
            _ => Err(parse_error(line, "only VERTEX_EST records are allowed in an estimate file")),
        }
    })?;
    if header.n.is_none() {
        return Err(parse_error(0, "missing N record"));
    }
    let missing: Vec<usize> = (0..slots.len()).filter(|&v| slots[v].is_none()).collect();
    if !missing.is_empty() {
        return Err(invalid(format!("estimates missing for vertices {missing:?}")));
    }
    Ok(slots.into_iter().flatten().collect())
}

/// Edge source that re-reads a graph file on every pass instead of holding
/// the edge list in memory.
///
/// Opening performs one validating pass (syntax, ranges, rotation validity,
/// duplicate pairs). Later passes yield edges in file order, normalized the
/// same way as [`parse_graph`], so results match the in-memory path exactly.
#[derive(Debug, Clone)]
pub struct StreamingGraphFile {
    path: PathBuf,
    n: usize,
    edge_count: usize,
}

impl StreamingGraphFile {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut header = Header { n: None };
        let mut seen: HashSet<(usize, usize)> = HashSet::new();
        let mut edge_count = 0;
        for_each_record(BufReader::new(File::open(&path)?), |line, record| {
            let Some(n) = header.accept(line, &record)? else {
                let Record::Count(n) = record else { unreachable!() };
                GraphBuilder::new(n).map_err(|e| at_line(line, e))?;
                return Ok(());
            };
            match record {
                Record::Edge(i, j, m, c) => {
                    let e = check_edge(n, Edge::new(i, j, rotation_at(line, &m)?, c))
                        .map_err(|e| at_line(line, e))?;
                    if !seen.insert((e.i, e.j)) {
                        return Err(Error::DuplicateEdge(e.i, e.j));
                    }
                    edge_count += 1;
                    Ok(())
                }
                Record::GroundTruth(id, m) => {
                    if id >= n {
                        return Err(invalid(format!("line {line}: vertex {id} out of range")));
                    }
                    rotation_at(line, &m).map(|_| ())
                }
                Record::Estimate(..) => Err(parse_error(line, "VERTEX_EST is not allowed in a graph file")),
                Record::Count(_) => unreachable!(),
            }
        })?;
        let n = header.n.ok_or_else(|| parse_error(0, "missing N record"))?;
        Ok(Self { path, n, edge_count })
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl EdgeSource for StreamingGraphFile {
    fn vertex_count(&self) -> usize {
        self.n
    }

    fn visit_edges(&self, f: &mut dyn FnMut(&Edge)) -> Result<()> {
        let n = self.n;
        for_each_record(BufReader::new(File::open(&self.path)?), |line, record| {
            if let Record::Edge(i, j, m, c) = record {
                let e = check_edge(n, Edge::new(i, j, rotation_at(line, &m)?, c))?;
                f(&e);
            }
            Ok(())
        })
    }
}

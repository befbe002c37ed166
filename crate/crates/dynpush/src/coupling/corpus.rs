//! The committed instance corpus for the coupling checks.
//!
//! An instance is a (graph, informed set, b) triple. Corpus files hold one
//! or more instance blocks separated by blank lines; each block is a header
//! line `I <comma-separated ids or -> b <int>` followed by the snapshot
//! edge-list format (`n m` then one `u v` line per edge). A header may end
//! with the token `reversed`, which asks the verifier to check the swapped
//! dominance direction — a deliberate negative control that fails on any
//! instance with strict dominance.
//!
//! [`builtin`] generates the same instances the committed files carry: a
//! fixed list of named graphs (path, star, cycle, complete, two-clique
//! bridge) plus seeded random graphs, each expanded over every informed
//! subset and every b in 1..=n.

use crate::dyngraph::{sample_gnp, GraphSnapshot};
use crate::error::{Error, Result};
use crate::nodeset::NodeSet;
use crate::rng::RngStream;

/// One corpus instance.
#[derive(Debug, Clone)]
pub struct CorpusInstance {
    pub name: String,
    pub graph: GraphSnapshot,
    pub informed: NodeSet,
    pub b: usize,
    /// Negative-control marker: verify the reversed dominance direction.
    pub reversed: bool,
}

impl CorpusInstance {
    pub fn to_block(&self) -> String {
        let ids = if self.informed.is_empty() {
            "-".to_string()
        } else {
            self.informed
                .iter()
                .map(|u| u.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let marker = if self.reversed { " reversed" } else { "" };
        format!(
            "I {ids} b {}{marker}\n{}",
            self.b,
            self.graph.to_edge_list()
        )
    }
}

/// Parse a corpus file; `source` names the file in instance labels and
/// error messages.
pub fn parse_corpus(text: &str, source: &str) -> Result<Vec<CorpusInstance>> {
    let mut instances = Vec::new();
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0usize;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let header_line = i + 1;
        let (informed_ids, b, reversed) = parse_header(lines[i], header_line)?;
        i += 1;
        let graph_start = i;
        while i < lines.len() && !lines[i].trim().is_empty() {
            i += 1;
        }
        let body = lines[graph_start..i].join("\n");
        let graph = GraphSnapshot::parse_edge_list(&body).map_err(|e| match e {
            Error::Parse { line, msg } => Error::Parse { line: graph_start + line, msg },
            other => other,
        })?;
        let n = graph.n();
        if informed_ids.iter().any(|&u| u as usize >= n) {
            return Err(Error::Parse {
                line: header_line,
                msg: format!("informed id out of range for n={n}"),
            });
        }
        if b < 1 || b > n {
            return Err(Error::Parse {
                line: header_line,
                msg: format!("b={b} out of [1, n] for n={n}"),
            });
        }
        let informed = NodeSet::from_iter(n, informed_ids);
        instances.push(CorpusInstance {
            name: format!("{source}#{}", instances.len()),
            graph,
            informed,
            b,
            reversed,
        });
    }
    Ok(instances)
}

fn parse_header(line: &str, line_no: usize) -> Result<(Vec<u32>, usize, bool)> {
    let bad = |msg: String| Error::Parse { line: line_no, msg };
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some("I") {
        return Err(bad(format!("header must start with 'I': {line:?}")));
    }
    let ids_token = tokens
        .next()
        .ok_or_else(|| bad("missing informed ids".into()))?;
    let ids: Vec<u32> = if ids_token == "-" {
        Vec::new()
    } else {
        ids_token
            .split(',')
            .map(|t| t.parse().map_err(|_| bad(format!("bad node id {t:?}"))))
            .collect::<Result<_>>()?
    };
    if tokens.next() != Some("b") {
        return Err(bad(format!("expected 'b' token: {line:?}")));
    }
    let b: usize = tokens
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad b value".into()))?;
    let reversed = match tokens.next() {
        None => false,
        Some("reversed") => true,
        Some(other) => return Err(bad(format!("unexpected token {other:?}"))),
    };
    Ok((ids, b, reversed))
}

/// Serialize instances as one corpus file.
pub fn format_corpus(instances: &[CorpusInstance]) -> String {
    instances
        .iter()
        .map(CorpusInstance::to_block)
        .collect::<Vec<_>>()
        .join("\n")
}

/// Read every `*.txt` file of a corpus directory, sorted by file name.
pub fn load_corpus_dir(dir: &std::path::Path) -> Result<Vec<CorpusInstance>> {
    let mut files: Vec<std::path::PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no corpus files in {}",
            dir.display()
        )));
    }
    let mut instances = Vec::new();
    for path in files {
        let text = std::fs::read_to_string(&path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        instances.extend(parse_corpus(&text, &name)?);
    }
    Ok(instances)
}

/// The named base graphs of the corpus, all with n ≤ 6.
pub fn named_graphs() -> Vec<(String, GraphSnapshot)> {
    let path5 = GraphSnapshot::new(5, (0..4).map(|i| (i, i + 1))).unwrap();
    let star5 = GraphSnapshot::new(5, (1..5).map(|v| (0, v))).unwrap();
    let cycle5 = GraphSnapshot::new(5, (0..5).map(|i| (i, (i + 1) % 5))).unwrap();
    let complete4 = GraphSnapshot::complete(4);
    // Two triangles joined by the bridge 2–3.
    let bridge6 = GraphSnapshot::new(
        6,
        [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)],
    )
    .unwrap();
    let mut graphs = vec![
        ("path5".to_string(), path5),
        ("star5".to_string(), star5),
        ("cycle5".to_string(), cycle5),
        ("complete4".to_string(), complete4),
        ("bridge6".to_string(), bridge6),
    ];
    // Seeded random graphs; the seeds are part of the corpus definition.
    let mut rng = RngStream::new(0xc0_4155, 0).rng();
    graphs.push(("random5".to_string(), sample_gnp(5, 0.5, &mut rng).unwrap()));
    graphs.push(("random6".to_string(), sample_gnp(6, 0.45, &mut rng).unwrap()));
    graphs
}

/// Every (graph, I, b) expansion of the named graphs.
pub fn builtin() -> Vec<CorpusInstance> {
    let mut instances = Vec::new();
    for (name, graph) in named_graphs() {
        let n = graph.n();
        for informed_mask in 0u32..(1 << n) {
            let informed =
                NodeSet::from_iter(n, (0..n as u32).filter(|v| informed_mask & (1 << v) != 0));
            for b in 1..=n {
                instances.push(CorpusInstance {
                    name: format!("{name}[I={:?},b={b}]", informed.to_vec()),
                    graph: graph.clone(),
                    informed: informed.clone(),
                    b,
                    reversed: false,
                });
            }
        }
    }
    instances
}

/// The builtin corpus grouped per named graph, as (file stem, content).
pub fn builtin_files() -> Vec<(String, String)> {
    named_graphs()
        .into_iter()
        .map(|(name, graph)| {
            let n = graph.n();
            let mut blocks = Vec::new();
            for informed_mask in 0u32..(1 << n) {
                let informed =
                    NodeSet::from_iter(n, (0..n as u32).filter(|v| informed_mask & (1 << v) != 0));
                for b in 1..=n {
                    blocks.push(CorpusInstance {
                        name: String::new(),
                        graph: graph.clone(),
                        informed: informed.clone(),
                        b,
                        reversed: false,
                    });
                }
            }
            (name, format_corpus(&blocks))
        })
        .collect()
}

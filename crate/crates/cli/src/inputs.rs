//! Input loading: files (graph6, edge lists, parent arrays) and `gen:` specs
//! for hosts and trees.

use anyhow::{anyhow, bail, Context, Result};
use std::collections::HashMap;
use std::path::Path;
use treebed::graph::{complete, parse_edge_list, random_gnp, Graph};
use treebed::graph6;
use treebed::saturation::planted_blowup_host;
use treebed::tree::{path_tree, star, Tree};
use treebed::tree_sample::{bounded_degree_tree, sample_labelled_tree, sample_unlabelled_tree};

/// Parses "gen:name(key=value,...)" or bare "gen:name".
fn parse_gen(spec: &str) -> Result<(String, HashMap<String, String>)> {
    let body = spec.strip_prefix("gen:").unwrap();
    let (name, rest) = match body.split_once('(') {
        None => (body.to_string(), String::new()),
        Some((n, r)) => {
            let r = r
                .strip_suffix(')')
                .ok_or_else(|| anyhow!("unclosed generator spec {spec:?}"))?;
            (n.to_string(), r.to_string())
        }
    };
    let mut kv = HashMap::new();
    for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("bad generator parameter {part:?}"))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok((name, kv))
}

fn get<T: std::str::FromStr>(kv: &HashMap<String, String>, key: &str, default: T) -> Result<T> {
    match kv.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| anyhow!("cannot parse {key}={v}")),
    }
}

pub fn load_graph(spec: &str, seed: u64) -> Result<Graph> {
    Ok(load_host_with_structure(spec, seed)?.0)
}

/// Loads a host; blow-up specs also return their cluster count so the
/// pipeline can align its decomposition granularity.
pub fn load_host_with_structure(spec: &str, seed: u64) -> Result<(Graph, Option<usize>)> {
    if spec.starts_with("gen:") {
        let (name, kv) = parse_gen(spec)?;
        return match name.as_str() {
            "blowup" => {
                let n = get(&kv, "n", 3000usize)?;
                let m = get(&kv, "m", 10usize)?;
                let d = get(&kv, "d", 0.3f64)?;
                let plant = get(&kv, "plant", 0.9f64)?;
                let s = get(&kv, "seed", seed)?;
                let host = planted_blowup_host(n, m, d, plant, s);
                Ok((host.graph, Some(m)))
            }
            "gnp" => {
                let n = get(&kv, "n", 200usize)?;
                let p = get(&kv, "p", 0.5f64)?;
                let s = get(&kv, "seed", seed)?;
                Ok((random_gnp(n, p, s), None))
            }
            "complete" => Ok((complete(get(&kv, "n", 100usize)?), None)),
            other => bail!("unknown host generator {other:?}"),
        };
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {spec:?}"))?;
    let trimmed = text.trim();
    // Heuristic: graph6 lines contain no spaces; edge lists do.
    if trimmed.lines().next().is_some_and(|l| !l.contains(' ')) {
        let graphs = graph6::decode_file(&text).map_err(|e| anyhow!("{e}"))?;
        match graphs.len() {
            0 => bail!("no graphs in {spec:?}"),
            1 => Ok((graphs.into_iter().next().unwrap(), None)),
            n => bail!("{spec:?} holds {n} graphs; expected one"),
        }
    } else {
        Ok((parse_edge_list(&text).map_err(|e| anyhow!("{e}"))?, None))
    }
}

pub fn load_tree(spec: &str, seed: u64) -> Result<Tree> {
    if spec.starts_with("gen:") {
        let (name, kv) = parse_gen(spec)?;
        return match name.as_str() {
            "bounded" => {
                let n = get(&kv, "n", 1500usize)?;
                let dmax = get(&kv, "dmax", 8usize)?;
                let s = get(&kv, "seed", seed)?;
                bounded_degree_tree(n, dmax, s).map_err(|e| anyhow!("{e}"))
            }
            "labelled" => {
                let n = get(&kv, "n", 100usize)?;
                let s = get(&kv, "seed", seed)?;
                Ok(sample_labelled_tree(n, s))
            }
            "unlabelled" => {
                let n = get(&kv, "n", 51usize)?;
                let s = get(&kv, "seed", seed)?;
                Ok(sample_unlabelled_tree(n, s))
            }
            "path" => Ok(path_tree(get(&kv, "n", 10usize)?)),
            "star" => Ok(star(get(&kv, "n", 10usize)?)),
            other => bail!("unknown tree generator {other:?}"),
        };
    }
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading {spec:?}"))?;
    let line = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| anyhow!("empty tree file {spec:?}"))?;
    Tree::from_parent_line(line).map_err(|e| anyhow!("{e}"))
}

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use dashmap::DashMap;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One node of the taxonomy: a set of synonymous lemmas.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Synset {
    pub id: String,
    #[serde(default)]
    pub lemmas: BTreeSet<String>,
    #[serde(default)]
    pub neighbors: BTreeSet<String>,
}

impl Synset {
    pub fn new<L, N>(id: &str, lemmas: L, neighbors: N) -> Self
    where
        L: IntoIterator,
        L::Item: AsRef<str>,
        N: IntoIterator,
        N::Item: AsRef<str>,
    {
        Synset {
            id: id.to_string(),
            lemmas: lemmas.into_iter().map(|l| l.as_ref().to_string()).collect(),
            neighbors: neighbors
                .into_iter()
                .map(|n| n.as_ref().to_string())
                .collect(),
        }
    }
}

const NO_PATH: u32 = u32::MAX;

/// Synset taxonomy with a lemma index and shortest-path sense similarity.
///
/// Neighbor edges are undirected: loading closes them symmetrically.
/// Word-pair distances are memoized in a concurrent cache, so a shared
/// `&Lexicon` can be used from many threads.
#[derive(Debug)]
pub struct Lexicon {
    synsets: Vec<Synset>,
    by_id: HashMap<String, u32>,
    adjacency: Vec<Vec<u32>>,
    lemma_ids: HashMap<String, u32>,
    lemma_senses: Vec<Vec<u32>>,
    distance_cache: DashMap<(u32, u32), u32>,
}

impl Clone for Lexicon {
    fn clone(&self) -> Self {
        Lexicon {
            synsets: self.synsets.clone(),
            by_id: self.by_id.clone(),
            adjacency: self.adjacency.clone(),
            lemma_ids: self.lemma_ids.clone(),
            lemma_senses: self.lemma_senses.clone(),
            distance_cache: DashMap::new(),
        }
    }
}

impl Lexicon {
    pub fn from_records(records: Vec<Synset>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(records.len());
        for (i, s) in records.iter().enumerate() {
            if by_id.insert(s.id.clone(), i as u32).is_some() {
                return Err(Error::DuplicateSynset(s.id.clone()));
            }
        }

        let mut synsets = records;
        let mut edges: Vec<(u32, u32)> = Vec::new();
        for (i, s) in synsets.iter().enumerate() {
            for n in &s.neighbors {
                let j = *by_id.get(n).ok_or_else(|| Error::DanglingNeighbor {
                    synset: s.id.clone(),
                    neighbor: n.clone(),
                })?;
                if j as usize == i {
                    return Err(Error::SelfLoop(s.id.clone()));
                }
                edges.push((i as u32, j));
            }
        }

        let mut adjacency: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); synsets.len()];
        for &(a, b) in &edges {
            adjacency[a as usize].insert(b);
            adjacency[b as usize].insert(a);
        }
        let ids: Vec<String> = synsets.iter().map(|s| s.id.clone()).collect();
        for (i, s) in synsets.iter_mut().enumerate() {
            s.neighbors = adjacency[i]
                .iter()
                .map(|&j| ids[j as usize].clone())
                .collect();
            s.lemmas = s.lemmas.iter().map(|l| l.to_lowercase()).collect();
        }

        let mut lemma_ids: HashMap<String, u32> = HashMap::new();
        let mut lemma_senses: Vec<Vec<u32>> = Vec::new();
        for (i, s) in synsets.iter().enumerate() {
            for l in &s.lemmas {
                let next = lemma_senses.len() as u32;
                let id = *lemma_ids.entry(l.clone()).or_insert(next);
                if id == next {
                    lemma_senses.push(Vec::new());
                }
                lemma_senses[id as usize].push(i as u32);
            }
        }

        Ok(Lexicon {
            synsets,
            by_id,
            adjacency: adjacency
                .into_iter()
                .map(|s| s.into_iter().collect())
                .collect(),
            lemma_ids,
            lemma_senses,
            distance_cache: DashMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }

    pub fn synsets(&self) -> &[Synset] {
        &self.synsets
    }

    pub fn synset(&self, id: &str) -> Option<&Synset> {
        self.by_id.get(id).map(|&i| &self.synsets[i as usize])
    }

    /// Ids of every synset containing `lemma`.
    pub fn senses(&self, lemma: &str) -> Vec<&str> {
        self.lemma_id(lemma)
            .map(|l| {
                self.lemma_senses[l as usize]
                    .iter()
                    .map(|&s| self.synsets[s as usize].id.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub(crate) fn lemma_id(&self, lemma: &str) -> Option<u32> {
        self.lemma_ids.get(lemma).copied()
    }

    fn index(&self, id: &str) -> Result<u32> {
        self.by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownSynset(id.to_string()))
    }

    /// `1 / (1 + d)` for the unweighted shortest path length `d`, or 0 when the
    /// synsets are in different components.
    pub fn sense_similarity(&self, a: &str, b: &str) -> Result<f64> {
        let (a, b) = (self.index(a)?, self.index(b)?);
        Ok(path_similarity(self.shortest_path(&[a], &[b])))
    }

    /// Shortest path length between two synsets, `None` if disconnected.
    pub fn distance(&self, a: &str, b: &str) -> Result<Option<u32>> {
        let (a, b) = (self.index(a)?, self.index(b)?);
        let d = self.shortest_path(&[a], &[b]);
        Ok((d != NO_PATH).then_some(d))
    }

    /// Best sense similarity between two words; 0 if either has no synsets.
    /// Verbatim equality is not special-cased here.
    pub fn word_similarity(&self, u: &str, v: &str) -> f64 {
        match (self.lemma_id(u), self.lemma_id(v)) {
            (Some(a), Some(b)) => self.lemma_similarity(a, b),
            _ => 0.0,
        }
    }

    pub(crate) fn lemma_similarity(&self, a: u32, b: u32) -> f64 {
        let key = if a <= b { (a, b) } else { (b, a) };
        if let Some(d) = self.distance_cache.get(&key) {
            return path_similarity(*d);
        }
        let d = self.shortest_path(
            &self.lemma_senses[key.0 as usize],
            &self.lemma_senses[key.1 as usize],
        );
        self.distance_cache.insert(key, d);
        path_similarity(d)
    }

    /// Minimum path length between any source and any target, by
    /// bidirectional breadth-first search that grows the smaller frontier one
    /// full level at a time.
    fn shortest_path(&self, sources: &[u32], targets: &[u32]) -> u32 {
        let mut seen: [HashMap<u32, u32>; 2] = [
            sources.iter().map(|&s| (s, 0)).collect(),
            targets.iter().map(|&t| (t, 0)).collect(),
        ];
        if sources.iter().any(|s| seen[1].contains_key(s)) {
            return 0;
        }
        let mut frontiers: [Vec<u32>; 2] = [
            seen[0].keys().copied().collect(),
            seen[1].keys().copied().collect(),
        ];
        let mut depth = [0u32; 2];
        while !frontiers[0].is_empty() && !frontiers[1].is_empty() {
            let side = usize::from(frontiers[1].len() < frontiers[0].len());
            let other = 1 - side;
            depth[side] += 1;
            let mut best = NO_PATH;
            let mut next = Vec::new();
            for &node in &frontiers[side] {
                for &n in &self.adjacency[node as usize] {
                    if seen[side].contains_key(&n) {
                        continue;
                    }
                    seen[side].insert(n, depth[side]);
                    if let Some(&d) = seen[other].get(&n) {
                        best = best.min(depth[side] + d);
                    }
                    next.push(n);
                }
            }
            if best != NO_PATH {
                return best;
            }
            frontiers[side] = next;
        }
        NO_PATH
    }
}

fn path_similarity(d: u32) -> f64 {
    if d == NO_PATH {
        0.0
    } else {
        1.0 / (1.0 + d as f64)
    }
}

/// Reads a lexicon file: one JSON synset record per line.
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Synset = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: n + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Lexicon::from_records(records)
}

pub fn write_lexicon(lexicon: &Lexicon, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for s in lexicon.synsets() {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

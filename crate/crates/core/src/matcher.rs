//! Exact multi-term matching over token streams.
//!
//! The automaton is Aho-Corasick over token ids rather than bytes, so a term
//! can only match on token boundaries. Every occurrence is reported,
//! including overlapping and nested ones.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::terminology::Terminology;

const ROOT: u32 = 0;
const NONE: u32 = u32::MAX;

/// A matched term span `[start, end)` in a token stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermOccurrence {
    /// Term index in the terminology.
    pub term: u32,
    pub start: u32,
    pub end: u32,
}

impl TermOccurrence {
    pub fn len(&self) -> usize {
        (self.end - self.start) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Clone, Debug)]
struct Node {
    next: HashMap<u32, u32>,
    fail: u32,
    /// Term ending exactly at this node.
    term: u32,
    /// Nearest node on the failure chain that ends a term.
    dict: u32,
    depth: u32,
}

impl Node {
    fn new(depth: u32) -> Self {
        Node {
            next: HashMap::new(),
            fail: ROOT,
            term: NONE,
            dict: NONE,
            depth,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MatchAutomaton {
    alphabet: HashMap<String, u32>,
    nodes: Vec<Node>,
}

impl MatchAutomaton {
    pub fn build(terminology: &Terminology) -> Result<Self> {
        Self::from_terms(terminology.terms())
    }

    /// Build from token sequences; the i-th sequence gets term index i.
    pub fn from_terms<'a, I>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut alphabet = HashMap::new();
        let mut nodes = vec![Node::new(0)];
        let mut n_terms = 0;

        for (term_idx, term) in terms.into_iter().enumerate() {
            if term.is_empty() {
                return Err(Error::InvalidConfig(format!("term {term_idx} is empty")));
            }
            let mut state = ROOT;
            for tok in term {
                let next_id = alphabet.len() as u32;
                let sym = *alphabet.entry(tok.clone()).or_insert(next_id);
                state = match nodes[state as usize].next.get(&sym) {
                    Some(&s) => s,
                    None => {
                        let s = nodes.len() as u32;
                        let depth = nodes[state as usize].depth + 1;
                        nodes.push(Node::new(depth));
                        nodes[state as usize].next.insert(sym, s);
                        s
                    }
                };
            }
            // Duplicate sequences keep the first index.
            if nodes[state as usize].term == NONE {
                nodes[state as usize].term = term_idx as u32;
            }
            n_terms += 1;
        }
        if n_terms == 0 {
            return Err(Error::EmptyTerminology);
        }

        // Breadth-first failure links.
        let mut queue = std::collections::VecDeque::new();
        let root_children: Vec<u32> = nodes[0].next.values().copied().collect();
        for child in root_children {
            nodes[child as usize].fail = ROOT;
            queue.push_back(child);
        }
        while let Some(state) = queue.pop_front() {
            let edges: Vec<(u32, u32)> = nodes[state as usize]
                .next
                .iter()
                .map(|(&k, &v)| (k, v))
                .collect();
            for (sym, child) in edges {
                let mut f = nodes[state as usize].fail;
                let fail = loop {
                    if let Some(&s) = nodes[f as usize].next.get(&sym) {
                        break s;
                    }
                    if f == ROOT {
                        break ROOT;
                    }
                    f = nodes[f as usize].fail;
                };
                nodes[child as usize].fail = fail;
                nodes[child as usize].dict = if nodes[fail as usize].term != NONE {
                    fail
                } else {
                    nodes[fail as usize].dict
                };
                queue.push_back(child);
            }
        }

        Ok(MatchAutomaton { alphabet, nodes })
    }

    /// Symbol id of a token, if it occurs in any term.
    pub fn symbol(&self, token: &str) -> Option<u32> {
        self.alphabet.get(token).copied()
    }

    pub fn scan<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TermOccurrence> {
        self.scan_symbols(tokens.iter().map(|t| self.symbol(t.as_ref())))
    }

    /// Scan a stream of pre-resolved symbols (see [`MatchAutomaton::symbol`]).
    ///
    /// Occurrences come out ordered by `(end, start)`.
    pub fn scan_symbols<I>(&self, symbols: I) -> Vec<TermOccurrence>
    where
        I: IntoIterator<Item = Option<u32>>,
    {
        let mut out = Vec::new();
        let mut state = ROOT;
        for (pos, sym) in symbols.into_iter().enumerate() {
            state = match sym {
                None => ROOT,
                Some(sym) => self.step(state, sym),
            };
            let end = pos as u32 + 1;
            // The node itself is the longest match ending here; dictionary
            // links get strictly shorter, so starts increase.
            let mut hit = if self.nodes[state as usize].term != NONE {
                state
            } else {
                self.nodes[state as usize].dict
            };
            while hit != NONE {
                let node = &self.nodes[hit as usize];
                out.push(TermOccurrence {
                    term: node.term,
                    start: end - node.depth,
                    end,
                });
                hit = node.dict;
            }
        }
        out
    }

    fn step(&self, mut state: u32, sym: u32) -> u32 {
        loop {
            if let Some(&s) = self.nodes[state as usize].next.get(&sym) {
                return s;
            }
            if state == ROOT {
                return ROOT;
            }
            state = self.nodes[state as usize].fail;
        }
    }

    /// Count occurrences of each term index over a corpus of token streams.
    pub fn term_frequencies<I, D, S>(&self, corpus: I) -> HashMap<usize, u64>
    where
        I: IntoIterator<Item = D>,
        D: AsRef<[S]>,
        S: AsRef<str>,
    {
        let mut freqs = HashMap::new();
        for doc in corpus {
            for occ in self.scan(doc.as_ref()) {
                *freqs.entry(occ.term as usize).or_insert(0) += 1;
            }
        }
        freqs
    }
}

/// Write `doc TAB start TAB end TAB term TAB e1,e2,...` lines.
pub fn write_annotations<W: Write>(
    mut writer: W,
    terminology: &Terminology,
    doc_index: usize,
    occurrences: &[TermOccurrence],
) -> Result<()> {
    for occ in occurrences {
        let entities: Vec<&str> = terminology
            .entities_of(occ.term as usize)
            .iter()
            .map(|&e| terminology.entity(e as usize).as_str())
            .collect();
        writeln!(
            writer,
            "{doc_index}\t{}\t{}\t{}\t{}",
            occ.start,
            occ.end,
            terminology.term(occ.term as usize).join(" "),
            entities.join(",")
        )?;
    }
    Ok(())
}

/// Brute-force reference: test every term at every start offset.
#[cfg(test)]
pub(crate) fn brute_force_matches(terms: &[Vec<String>], tokens: &[String]) -> Vec<TermOccurrence> {
    let mut out = Vec::new();
    for start in 0..tokens.len() {
        for (idx, term) in terms.iter().enumerate() {
            let end = start + term.len();
            if end <= tokens.len() && tokens[start..end] == term[..] {
                out.push(TermOccurrence {
                    term: idx as u32,
                    start: start as u32,
                    end: end as u32,
                });
            }
        }
    }
    out.sort_by_key(|o| (o.end, o.start, o.term));
    out
}

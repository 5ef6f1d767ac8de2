//! Trained vectors for words, terms and entities, with cosine queries and
//! text/binary persistence.
//!
//! Text format: a `count dim` header, then one `key v1 … vd` line per
//! vector. Keys are namespaced (`word:`, `term:`, `ent:`); term tokens are
//! joined with `_`.
//!
//! Binary format (little-endian): magic `JETE`, version `u32`, dim `u32`,
//! then per record a kind byte (0 word, 1 term, 2 entity), key length
//! `u32`, key bytes, and `dim` `f32` values.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use indexmap::IndexMap;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::terminology::normalize;
use crate::trainer::ModelParams;

pub const MAGIC: &[u8; 4] = b"JETE";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PointKind {
    Word,
    Term,
    Entity,
}

impl PointKind {
    pub const ALL: [PointKind; 3] = [PointKind::Word, PointKind::Term, PointKind::Entity];

    pub fn prefix(self) -> &'static str {
        match self {
            PointKind::Word => "word",
            PointKind::Term => "term",
            PointKind::Entity => "ent",
        }
    }

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn from_prefix(prefix: &str) -> Option<Self> {
        match prefix {
            "word" => Some(PointKind::Word),
            "term" => Some(PointKind::Term),
            "ent" | "entity" => Some(PointKind::Entity),
            _ => None,
        }
    }
}

impl fmt::Display for PointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.prefix())
    }
}

impl std::str::FromStr for PointKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PointKind::from_prefix(s).ok_or_else(|| Error::InvalidConfig(format!("unknown point kind {s:?}")))
    }
}

/// Join term tokens with `_`, escaping `_` and `\` inside tokens.
pub fn term_key<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut key = String::new();
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            key.push('_');
        }
        for ch in tok.as_ref().chars() {
            if ch == '_' || ch == '\\' {
                key.push('\\');
            }
            key.push(ch);
        }
    }
    key
}

/// Inverse of [`term_key`].
pub fn term_tokens(key: &str) -> Vec<String> {
    let mut tokens = vec![String::new()];
    let mut chars = key.chars();
    while let Some(ch) = chars.next() {
        match ch {
            '\\' => {
                if let Some(next) = chars.next() {
                    tokens.last_mut().unwrap().push(next);
                }
            }
            '_' => tokens.push(String::new()),
            _ => tokens.last_mut().unwrap().push(ch),
        }
    }
    tokens
}

/// Split `word:cold` into its kind and key.
pub fn parse_key(namespaced: &str) -> Result<(PointKind, &str)> {
    let (prefix, key) = namespaced
        .split_once(':')
        .ok_or_else(|| Error::UnknownKey(namespaced.to_owned()))?;
    let kind = PointKind::from_prefix(prefix).ok_or_else(|| Error::UnknownKey(namespaced.to_owned()))?;
    if key.is_empty() {
        return Err(Error::UnknownKey(namespaced.to_owned()));
    }
    Ok((kind, key))
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Table {
    keys: IndexMap<String, ()>,
    data: Vec<f32>,
    norms: Vec<f64>,
}

impl Table {
    fn len(&self) -> usize {
        self.keys.len()
    }

    fn row(&self, idx: usize, dim: usize) -> &[f32] {
        &self.data[idx * dim..(idx + 1) * dim]
    }
}

/// A neighbor returned by [`EmbeddingSet::nearest`].
#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub kind: PointKind,
    pub key: String,
    pub cosine: f64,
}

impl Neighbor {
    pub fn namespaced(&self) -> String {
        format!("{}:{}", self.kind.prefix(), self.key)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    tables: [Table; 3],
}

impl EmbeddingSet {
    pub fn new(dim: usize) -> Self {
        EmbeddingSet {
            dim,
            tables: Default::default(),
        }
    }

    /// Export trained input vectors.
    pub fn from_model(vocab: &Vocabulary, params: &ModelParams) -> Result<Self> {
        let mut set = EmbeddingSet::new(params.dim);
        let to_f32 = |row: &[f64]| row.iter().map(|&x| x as f32).collect::<Vec<_>>();
        for w in 0..vocab.n_words() {
            set.insert(PointKind::Word, vocab.word(w), &to_f32(params.word_in.row(w)))?;
        }
        for t in 0..vocab.n_terms() {
            set.insert(PointKind::Term, &term_key(vocab.term_tokens(t)), &to_f32(params.term_in.row(t)))?;
        }
        for e in 0..vocab.n_entities() {
            set.insert(PointKind::Entity, vocab.entity(e).as_str(), &to_f32(params.entity_in.row(e)))?;
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self, kind: PointKind) -> usize {
        self.tables[kind as usize].len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.iter().all(|t| t.len() == 0)
    }

    pub fn insert(&mut self, kind: PointKind, key: &str, vector: &[f32]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if key.is_empty() {
            return Err(Error::InvalidConfig("empty key".into()));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig(format!("{}:{key} has non-finite components", kind.prefix())));
        }
        let table = &mut self.tables[kind as usize];
        if table.keys.insert(key.to_owned(), ()).is_some() {
            return Err(Error::InvalidConfig(format!("duplicate key {}:{key}", kind.prefix())));
        }
        table.data.extend_from_slice(vector);
        table.norms.push(norm(vector.iter().map(|&x| x as f64)));
        Ok(())
    }

    pub fn get(&self, kind: PointKind, key: &str) -> Option<&[f32]> {
        let table = &self.tables[kind as usize];
        table.keys.get_index_of(key).map(|i| table.row(i, self.dim))
    }

    /// Vector for `key` in double precision.
    pub fn vector(&self, kind: PointKind, key: &str) -> Option<Vec<f64>> {
        self.get(kind, key).map(|v| v.iter().map(|&x| x as f64).collect())
    }

    /// Lookup by namespaced key (`word:`, `term:`, `ent:`).
    pub fn lookup(&self, namespaced: &str) -> Result<Vec<f64>> {
        let (kind, key) = parse_key(namespaced)?;
        self.vector(kind, key).ok_or_else(|| Error::UnknownKey(namespaced.to_owned()))
    }

    pub fn keys(&self, kind: PointKind) -> impl Iterator<Item = &str> {
        self.tables[kind as usize].keys.keys().map(String::as_str)
    }

    /// Average of the word vectors of the in-vocabulary tokens of `s`.
    pub fn string_vector(&self, s: &str) -> Result<Vec<f64>> {
        let mut sum = vec![0.0; self.dim];
        let mut n = 0usize;
        for tok in normalize(s) {
            if let Some(v) = self.get(PointKind::Word, &tok) {
                for (acc, &x) in sum.iter_mut().zip(v) {
                    *acc += x as f64;
                }
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::Unrepresentable(s.to_owned()));
        }
        sum.iter_mut().for_each(|x| *x /= n as f64);
        Ok(sum)
    }

    /// Term vector of `s` if it is a known term, else its averaged word
    /// vector.
    pub fn term_or_backoff(&self, s: &str) -> Result<Vec<f64>> {
        let key = term_key(&normalize(s));
        match self.vector(PointKind::Term, &key) {
            Some(v) => Ok(v),
            None => self.string_vector(s),
        }
    }

    /// Top-`topk` points of the given kinds by cosine to `query`.
    ///
    /// `exclude` holds namespaced keys. Ties are broken by ascending
    /// namespaced key.
    pub fn nearest(
        &self,
        query: &[f64],
        kinds: &[PointKind],
        topk: usize,
        exclude: &HashSet<String>,
    ) -> Result<Vec<Neighbor>> {
        if topk == 0 {
            return Err(Error::InvalidConfig("topk must be at least 1".into()));
        }
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        let qnorm = norm(query.iter().copied());
        if qnorm == 0.0 {
            return Err(Error::ZeroVector);
        }

        let mut kinds = kinds.to_vec();
        kinds.sort();
        kinds.dedup();
        let mut scored: Vec<(f64, String, PointKind, &str)> = Vec::new();
        for kind in kinds {
            let table = &self.tables[kind as usize];
            for (i, key) in table.keys.keys().enumerate() {
                let namespaced = format!("{}:{key}", kind.prefix());
                if exclude.contains(&namespaced) || table.norms[i] == 0.0 {
                    continue;
                }
                let row = table.row(i, self.dim);
                let d: f64 = row.iter().zip(query).map(|(&x, &q)| x as f64 * q).sum();
                scored.push((d / (table.norms[i] * qnorm), namespaced, kind, key));
            }
        }
        if scored.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        let cmp = |a: &(f64, String, PointKind, &str), b: &(f64, String, PointKind, &str)| {
            b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1))
        };
        if topk < scored.len() {
            scored.select_nth_unstable_by(topk, cmp);
            scored.truncate(topk);
        }
        scored.sort_by(cmp);
        Ok(scored
            .into_iter()
            .map(|(cosine, _, kind, key)| Neighbor {
                kind,
                key: key.to_owned(),
                cosine,
            })
            .collect())
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let count: usize = self.tables.iter().map(Table::len).sum();
        writeln!(w, "{count} {}", self.dim)?;
        for kind in PointKind::ALL {
            let table = &self.tables[kind as usize];
            for (i, key) in table.keys.keys().enumerate() {
                write!(w, "{}:{key}", kind.prefix())?;
                for x in table.row(i, self.dim) {
                    write!(w, " {x:.8e}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for kind in PointKind::ALL {
            let table = &self.tables[kind as usize];
            for (i, key) in table.keys.keys().enumerate() {
                w.write_all(&[kind.code()])?;
                w.write_all(&(key.len() as u32).to_le_bytes())?;
                w.write_all(key.as_bytes())?;
                for x in table.row(i, self.dim) {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| Error::Corrupt("missing header".into()))??;
        let mut parts = header.split_whitespace();
        let parse = |s: Option<&str>| s.and_then(|s| s.parse::<usize>().ok());
        let (count, dim) = match (parse(parts.next()), parse(parts.next()), parts.next()) {
            (Some(c), Some(d), None) if d > 0 => (c, d),
            _ => return Err(Error::Corrupt(format!("bad header {header:?}"))),
        };

        let mut set = EmbeddingSet::new(dim);
        let mut seen = 0;
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let lineno = idx + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let namespaced = fields.next().unwrap();
            let (kind, key) = parse_key(namespaced)
                .map_err(|_| Error::Corrupt(format!("line {lineno}: bad key {namespaced:?}")))?;
            let values: Vec<f32> = fields
                .map(|f| f.parse::<f32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Corrupt(format!("line {lineno} ({namespaced}): {e}")))?;
            if values.len() != dim {
                return Err(Error::Corrupt(format!(
                    "line {lineno} ({namespaced}): expected {dim} values, found {}",
                    values.len()
                )));
            }
            set.insert(kind, key, &values)
                .map_err(|e| Error::Corrupt(format!("line {lineno}: {e}")))?;
            seen += 1;
        }
        if seen != count {
            return Err(Error::Corrupt(format!("header announces {count} vectors, found {seen}")));
        }
        Ok(set)
    }

    pub fn read_binary<R: Read>(mut reader: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        reader
            .read_exact(&mut magic)
            .map_err(|_| Error::Corrupt("missing magic bytes".into()))?;
        if &magic != MAGIC {
            return Err(Error::Corrupt(format!("bad magic bytes {magic:?}, expected \"JETE\"")));
        }
        let version = read_u32(&mut reader).map_err(|_| Error::Corrupt("truncated header".into()))?;
        if version != FORMAT_VERSION {
            return Err(Error::Corrupt(format!("unsupported version {version}")));
        }
        let dim = read_u32(&mut reader).map_err(|_| Error::Corrupt("truncated header".into()))? as usize;
        if dim == 0 {
            return Err(Error::Corrupt("dimension is zero".into()));
        }

        let mut set = EmbeddingSet::new(dim);
        let mut record = 0usize;
        let mut values = vec![0f32; dim];
        let mut buf = vec![0u8; dim * 4];
        loop {
            let mut code = [0u8; 1];
            match reader.read(&mut code)? {
                0 => break,
                _ => record += 1,
            }
            let truncated = |what: &str| Error::Corrupt(format!("record {record}: truncated {what}"));
            let kind = PointKind::from_code(code[0])
                .ok_or_else(|| Error::Corrupt(format!("record {record}: unknown kind byte {}", code[0])))?;
            let len = read_u32(&mut reader).map_err(|_| truncated("key length"))? as usize;
            let mut key = vec![0u8; len];
            reader.read_exact(&mut key).map_err(|_| truncated("key"))?;
            let key = String::from_utf8(key)
                .map_err(|_| Error::Corrupt(format!("record {record}: key is not UTF-8")))?;
            reader
                .read_exact(&mut buf)
                .map_err(|_| truncated(&format!("vector for {}:{key}", kind.prefix())))?;
            for (v, chunk) in values.iter_mut().zip(buf.chunks_exact(4)) {
                *v = f32::from_le_bytes(chunk.try_into().unwrap());
            }
            set.insert(kind, &key, &values)
                .map_err(|e| Error::Corrupt(format!("record {record}: {e}")))?;
        }
        Ok(set)
    }

    /// Load either format, sniffing the magic bytes.
    pub fn load(path: &Path) -> Result<Self> {
        let inner = || -> Result<Self> {
            let mut reader = BufReader::new(std::fs::File::open(path)?);
            let head = reader.fill_buf()?;
            if head.starts_with(MAGIC) {
                Self::read_binary(reader)
            } else if head.first().is_some_and(u8::is_ascii_digit) {
                Self::read_text(reader)
            } else {
                Self::read_binary(reader)
            }
        };
        inner().map_err(|e| e.in_file(path))
    }

    /// Save atomically (temporary file, then rename).
    pub fn save(&self, path: &Path, format: Format) -> Result<()> {
        crate::output::write_atomically(path, |w| match format {
            Format::Text => self.write_text(w),
            Format::Binary => self.write_binary(w),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Binary,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Format::Text),
            "binary" | "bin" => Ok(Format::Binary),
            _ => Err(Error::InvalidConfig(format!("unknown format {s:?}"))),
        }
    }
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn norm<I: Iterator<Item = f64>>(xs: I) -> f64 {
    xs.map(|x| x * x).sum::<f64>().sqrt()
}

/// x·y / (‖x‖‖y‖).
pub fn cosine(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let nx = norm(x.iter().copied());
    let ny = norm(y.iter().copied());
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroVector);
    }
    let d: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok(d / (nx * ny))
}

//! Term ↔ entity mappings used for distant supervision.
//!
//! A terminology is a many-to-many relation between normalized terms
//! (token sequences) and entity identifiers. Terms and entities are stored
//! in lexicographic order, so two terminologies holding the same relation
//! have identical indices regardless of the order of the input records.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use indexmap::IndexMap;

use crate::error::{Error, Result};

/// Lowercase `raw` and split it into tokens.
///
/// Every character that is neither alphanumeric nor whitespace acts as a
/// token boundary, exactly like whitespace. Digits are kept.
pub fn normalize(raw: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in raw.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Opaque knowledge-base identifier such as a UMLS CUI or a page title.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::InvalidConfig("entity id is empty".into()));
        }
        if id.chars().any(char::is_whitespace) {
            return Err(Error::InvalidConfig(format!(
                "entity id {id:?} contains whitespace"
            )));
        }
        Ok(EntityId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for EntityId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EntityId::new(s)
    }
}

/// Statistics gathered while loading a terminology.
#[derive(Debug, Default)]
pub struct LoadReport {
    /// Records whose surface normalized to zero tokens.
    pub dropped_empty: usize,
    /// Malformed records, with their line numbers.
    pub errors: Vec<Error>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Terminology {
    source_name: String,
    /// Term tokens → sorted entity indices.
    terms: IndexMap<Vec<String>, Vec<u32>>,
    /// Entity → sorted term indices.
    entities: IndexMap<EntityId, Vec<u32>>,
}

impl Terminology {
    /// Build a terminology from (surface, entity) pairs.
    ///
    /// Surfaces that normalize to nothing are skipped. Returns an error if no
    /// pair survives.
    pub fn from_pairs<S, I>(source_name: &str, pairs: I) -> Result<Self>
    where
        S: AsRef<str>,
        I: IntoIterator<Item = (S, EntityId)>,
    {
        let mut relation: BTreeMap<Vec<String>, BTreeSet<EntityId>> = BTreeMap::new();
        for (surface, entity) in pairs {
            let term = normalize(surface.as_ref());
            if !term.is_empty() {
                relation.entry(term).or_default().insert(entity);
            }
        }
        Self::from_relation(source_name, relation)
    }

    fn from_relation(
        source_name: &str,
        relation: BTreeMap<Vec<String>, BTreeSet<EntityId>>,
    ) -> Result<Self> {
        if relation.is_empty() {
            return Err(Error::EmptyTerminology);
        }

        let all_entities: BTreeSet<&EntityId> = relation.values().flatten().collect();
        let mut entities: IndexMap<EntityId, Vec<u32>> = all_entities
            .into_iter()
            .map(|e| (e.clone(), Vec::new()))
            .collect();

        let mut terms = IndexMap::with_capacity(relation.len());
        for (term_idx, (term, ents)) in relation.into_iter().enumerate() {
            // BTreeSet iteration is sorted, and entity indices follow the same
            // order, so the index list comes out sorted as well.
            let idxs: Vec<u32> = ents
                .iter()
                .map(|e| {
                    let (idx, _, term_list) = entities.get_full_mut(e).unwrap();
                    term_list.push(term_idx as u32);
                    idx as u32
                })
                .collect();
            terms.insert(term, idxs);
        }

        Ok(Terminology {
            source_name: source_name.to_owned(),
            terms,
            entities,
        })
    }

    /// Read two-column TSV records (`surface TAB entity-id`).
    ///
    /// Malformed lines are reported in the returned [`LoadReport`] and
    /// skipped; only an I/O failure or an empty result aborts the load.
    pub fn load<R: BufRead>(source_name: &str, reader: R) -> Result<(Self, LoadReport)> {
        let mut report = LoadReport::default();
        let mut relation: BTreeMap<Vec<String>, BTreeSet<EntityId>> = BTreeMap::new();

        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                report.errors.push(Error::Format {
                    line: lineno,
                    message: format!("expected 2 tab-separated fields, found {}", fields.len()),
                });
                continue;
            }
            let entity = match EntityId::new(fields[1].trim()) {
                Ok(e) => e,
                Err(e) => {
                    report.errors.push(Error::Format {
                        line: lineno,
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            let term = normalize(fields[0]);
            if term.is_empty() {
                report.dropped_empty += 1;
                continue;
            }
            relation.entry(term).or_default().insert(entity);
        }

        if report.dropped_empty > 0 {
            log::warn!(
                "{source_name}: dropped {} records with empty normalized surface",
                report.dropped_empty
            );
        }
        for err in &report.errors {
            log::warn!("{source_name}: {err}");
        }

        Ok((Self::from_relation(source_name, relation)?, report))
    }

    /// Write the relation as TSV, one (term, entity) pair per line.
    pub fn write_tsv<W: Write>(&self, mut writer: W) -> Result<()> {
        for (term, ents) in &self.terms {
            let surface = term.join(" ");
            for &e in ents {
                writeln!(writer, "{surface}\t{}", self.entity(e as usize))?;
            }
        }
        Ok(())
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn term(&self, idx: usize) -> &[String] {
        self.terms.get_index(idx).expect("term index out of range").0
    }

    pub fn term_index(&self, term: &[String]) -> Option<usize> {
        self.terms.get_index_of(term)
    }

    pub fn entity(&self, idx: usize) -> &EntityId {
        self.entities
            .get_index(idx)
            .expect("entity index out of range")
            .0
    }

    pub fn entity_index(&self, entity: &EntityId) -> Option<usize> {
        self.entities.get_index_of(entity)
    }

    /// Entity indices a term can refer to (E_t).
    pub fn entities_of(&self, term_idx: usize) -> &[u32] {
        &self.terms[term_idx]
    }

    /// Term indices that can refer to an entity (T_e).
    pub fn terms_of(&self, entity_idx: usize) -> &[u32] {
        &self.entities[entity_idx]
    }

    pub fn terms(&self) -> impl Iterator<Item = &[String]> {
        self.terms.keys().map(Vec::as_slice)
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityId> {
        self.entities.keys()
    }

    /// Number of entities a normalized term can refer to; 0 if unknown.
    pub fn polysemy(&self, term: &[String]) -> usize {
        self.terms.get(term).map_or(0, Vec::len)
    }

    /// Frequency-weighted mean polysemy of each entity's matched terms.
    ///
    /// `term_freqs` is indexed by term index. Entities whose terms were
    /// never matched are omitted.
    pub fn corpus_polysemy(&self, term_freqs: &HashMap<usize, u64>) -> PolysemyReport {
        let mut report = PolysemyReport::default();
        for (entity, term_idxs) in &self.entities {
            let mut z: u64 = 0;
            let mut weighted: u128 = 0;
            for &t in term_idxs {
                let f = term_freqs.get(&(t as usize)).copied().unwrap_or(0);
                z += f;
                weighted += f as u128 * self.terms[t as usize].len() as u128;
            }
            if z > 0 {
                report
                    .per_entity
                    .insert(entity.clone(), weighted as f64 / z as f64);
                report.mention_counts.insert(entity.clone(), z);
            }
        }
        report
    }
}

/// Corpus polysemy CP(e) and mention mass Z for every mentioned entity.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolysemyReport {
    pub per_entity: BTreeMap<EntityId, f64>,
    pub mention_counts: BTreeMap<EntityId, u64>,
}

/// CP histogram bands: unambiguous, mildly ambiguous, and at least 50%
/// expected ambiguity per mention (CP ≥ 2).
pub const CP_BANDS: [(&str, f64, f64); 4] = [
    ("CP=1", 1.0, 1.0),
    ("1<CP<1.5", 1.0, 1.5),
    ("1.5<=CP<2", 1.5, 2.0),
    ("CP>=2", 2.0, f64::INFINITY),
];

impl PolysemyReport {
    /// Rows sorted by descending CP, then ascending entity id.
    pub fn sorted_rows(&self) -> Vec<(&EntityId, f64, u64)> {
        let mut rows: Vec<_> = self
            .per_entity
            .iter()
            .map(|(e, &cp)| (e, cp, self.mention_counts[e]))
            .collect();
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        rows
    }

    /// `entity TAB CP TAB Z`, sorted by descending CP.
    pub fn write_tsv<W: Write>(&self, mut writer: W) -> Result<()> {
        for (entity, cp, z) in self.sorted_rows() {
            writeln!(writer, "{entity}\t{cp}\t{z}")?;
        }
        Ok(())
    }

    /// Entity counts per [`CP_BANDS`] band.
    pub fn histogram(&self) -> Vec<(&'static str, usize)> {
        let mut counts = [0usize; CP_BANDS.len()];
        for &cp in self.per_entity.values() {
            let band = if cp <= 1.0 {
                0
            } else {
                CP_BANDS
                    .iter()
                    .skip(1)
                    .position(|&(_, lo, hi)| cp >= lo && cp < hi)
                    .map_or(CP_BANDS.len() - 1, |p| p + 1)
            };
            counts[band] += 1;
        }
        CP_BANDS
            .iter()
            .zip(counts)
            .map(|(&(name, _, _), c)| (name, c))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eid(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(str::to_owned).collect()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("New-York!"), vec!["new", "york"]);
        assert!(normalize("").is_empty());
        assert_eq!(normalize("acute  rhinitis"), vec!["acute", "rhinitis"]);
        assert_eq!(normalize("Type 2 Diabetes"), vec!["type", "2", "diabetes"]);
        assert_eq!(normalize("Ünïcode_ß"), vec!["ünïcode", "ß"]);
    }

    #[test]
    fn load_many_to_many() {
        let input = "cold\tC0009443\ncold\tC0024117\nacute rhinitis\tC0009443\n";
        let (t, report) = Terminology::load("t", input.as_bytes()).unwrap();
        assert!(report.errors.is_empty());
        assert_eq!(t.polysemy(&toks("cold")), 2);
        let c = t.entity_index(&eid("C0009443")).unwrap();
        assert_eq!(t.terms_of(c).len(), 2);
    }

    #[test]
    fn load_drops_empty_surfaces() {
        let err = Terminology::load("t", "!!\tX1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::EmptyTerminology));

        let (t, report) = Terminology::load("t", "!!\tX1\ncold\tC1\n".as_bytes()).unwrap();
        assert_eq!(report.dropped_empty, 1);
        assert_eq!(t.n_terms(), 1);
    }

    #[test]
    fn load_merges_case_variants() {
        let (t, _) = Terminology::load("t", "Cold\tC1\ncold\tC1\n".as_bytes()).unwrap();
        assert_eq!(t.n_terms(), 1);
        assert_eq!(t.term(0), toks("cold").as_slice());
        assert_eq!(t.entities_of(0), &[0]);
    }

    #[test]
    fn load_reports_malformed_lines() {
        let input = "cold\tC1\nbroken line\nx\ty\tz\nflu\tC2\n";
        let (t, report) = Terminology::load("t", input.as_bytes()).unwrap();
        assert_eq!(t.n_terms(), 2);
        let lines: Vec<usize> = report
            .errors
            .iter()
            .map(|e| match e {
                Error::Format { line, .. } => *line,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(lines, vec![2, 3]);
    }

    #[test]
    fn polysemy_lookup() {
        let pairs = (0..30).map(|i| ("Washington County", eid(&format!("county{i}"))));
        let t = Terminology::from_pairs("us", pairs).unwrap();
        assert_eq!(t.polysemy(&toks("washington county")), 30);
        assert_eq!(t.polysemy(&toks("unknown")), 0);
    }

    #[test]
    fn corpus_polysemy_worked_examples() {
        // E has "t1" (shared with one other entity) and "t2" (shared with five).
        let mut pairs = vec![("t1", eid("E")), ("t1", eid("F")), ("t2", eid("E"))];
        for i in 0..5 {
            pairs.push(("t2", eid(&format!("G{i}"))));
        }
        pairs.push(("mono", eid("M")));
        pairs.push(("mono two", eid("M")));
        pairs.push(("never", eid("N")));
        let t = Terminology::from_pairs("x", pairs).unwrap();
        let idx = |s: &str| t.term_index(&toks(s)).unwrap();
        let freqs: HashMap<usize, u64> =
            [(idx("t1"), 3), (idx("t2"), 1), (idx("mono"), 4), (idx("mono two"), 9)]
                .into_iter()
                .collect();

        let report = t.corpus_polysemy(&freqs);
        assert_eq!(report.per_entity[&eid("E")], 3.0);
        assert_eq!(report.mention_counts[&eid("E")], 4);
        assert_eq!(report.per_entity[&eid("M")], 1.0);
        assert!(!report.per_entity.contains_key(&eid("N")));

        let rows = report.sorted_rows();
        assert_eq!(rows[0].0, &eid("G0"));
        assert_eq!(rows[0].1, 6.0);
        assert_eq!(rows.last().unwrap().0, &eid("M"));

        let hist: HashMap<_, _> = report.histogram().into_iter().collect();
        assert_eq!(hist["CP=1"], 1);
        assert_eq!(hist["CP>=2"], 7);
    }

    #[test]
    fn polysemy_report_tsv() {
        let t = Terminology::from_pairs("x", [("a", eid("E1")), ("a", eid("E2"))]).unwrap();
        let report = t.corpus_polysemy(&[(0, 5)].into_iter().collect());
        let mut out = Vec::new();
        report.write_tsv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "E1\t2\t5\nE2\t2\t5\n");
    }

    #[test]
    fn entity_id_validation() {
        assert!(EntityId::new("").is_err());
        assert!(EntityId::new("C 1").is_err());
        assert!(EntityId::new("Q42").is_ok());
    }

    fn arb_pairs() -> impl Strategy<Value = Vec<(String, String)>> {
        prop::collection::vec(
            ("[a-dA-D !.-]{0,12}", "[A-E][0-9]"),
            1..40,
        )
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,40}") {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once.join(" ")), once);
        }

        #[test]
        fn serialized_form_reloads_identically(pairs in arb_pairs()) {
            let pairs: Vec<(String, EntityId)> =
                pairs.into_iter().map(|(s, e)| (s, eid(&e))).collect();
            if let Ok(t) = Terminology::from_pairs("p", pairs) {
                let mut buf = Vec::new();
                t.write_tsv(&mut buf).unwrap();
                let (again, report) = Terminology::load("p", buf.as_slice()).unwrap();
                prop_assert!(report.errors.is_empty());
                prop_assert_eq!(again, t);
            }
        }

        #[test]
        fn maps_are_inverse(pairs in arb_pairs(), freqs in prop::collection::vec(0u64..20, 40)) {
            let pairs: Vec<(String, EntityId)> =
                pairs.into_iter().map(|(s, e)| (s, eid(&e))).collect();
            if let Ok(t) = Terminology::from_pairs("p", pairs) {
                for ti in 0..t.n_terms() {
                    prop_assert!(!t.entities_of(ti).is_empty());
                    for &e in t.entities_of(ti) {
                        prop_assert!(t.terms_of(e as usize).contains(&(ti as u32)));
                    }
                }
                for ei in 0..t.n_entities() {
                    prop_assert!(!t.terms_of(ei).is_empty());
                    for &ti in t.terms_of(ei) {
                        prop_assert!(t.entities_of(ti as usize).contains(&(ei as u32)));
                    }
                }

                // 1 <= CP(e) <= max polysemy of e's terms
                let term_freqs: HashMap<usize, u64> =
                    (0..t.n_terms()).map(|i| (i, freqs[i % freqs.len()])).collect();
                let report = t.corpus_polysemy(&term_freqs);
                for (e, &cp) in &report.per_entity {
                    let ei = t.entity_index(e).unwrap();
                    let matched: Vec<usize> = t.terms_of(ei).iter()
                        .filter(|&&ti| term_freqs[&(ti as usize)] > 0)
                        .map(|&ti| t.entities_of(ti as usize).len())
                        .collect();
                    let max = *matched.iter().max().unwrap() as f64;
                    prop_assert!(cp >= 1.0 && cp <= max + 1e-12);
                    let all_mono = matched.iter().all(|&p| p == 1);
                    prop_assert_eq!(cp == 1.0, all_mono);
                }
            }
        }
    }
}

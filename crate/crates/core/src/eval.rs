//! Intrinsic and extrinsic evaluation protocols: similarity/relatedness
//! ranking, analogy completion, and unsupervised entity disambiguation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;

use rand::Rng;

use crate::embeddings::{cosine, EmbeddingSet, PointKind};
use crate::error::{Error, Result};
use crate::terminology::{normalize, EntityId};

/// Scoring setting for a similarity/relatedness pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SimSetting {
    Entity,
    Word,
    Term,
    EntityPlusWord,
    Cross,
}

impl std::str::FromStr for SimSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "entity" => Ok(SimSetting::Entity),
            "word" => Ok(SimSetting::Word),
            "term" => Ok(SimSetting::Term),
            "entity+word" | "entityplusword" | "entity-word" => Ok(SimSetting::EntityPlusWord),
            "cross" => Ok(SimSetting::Cross),
            _ => Err(Error::InvalidConfig(format!("unknown similarity setting {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimRelPair {
    pub string1: String,
    pub string2: String,
    pub entity1: EntityId,
    pub entity2: EntityId,
    pub gold: f64,
}

fn entity_vec(set: &EmbeddingSet, e: &EntityId) -> Option<Vec<f64>> {
    set.vector(PointKind::Entity, e.as_str())
}

/// Score a pair under `setting`; `None` if a required vector is missing.
pub fn pair_score(p: &SimRelPair, set: &EmbeddingSet, setting: SimSetting) -> Option<f64> {
    let ents = || Some((entity_vec(set, &p.entity1)?, entity_vec(set, &p.entity2)?));
    let strs = || Some((set.string_vector(&p.string1).ok()?, set.string_vector(&p.string2).ok()?));
    let cos = |a: &[f64], b: &[f64]| cosine(a, b).ok();
    match setting {
        SimSetting::Entity => {
            let (e1, e2) = ents()?;
            cos(&e1, &e2)
        }
        SimSetting::Word => {
            let (s1, s2) = strs()?;
            cos(&s1, &s2)
        }
        SimSetting::Term => {
            let t1 = set.term_or_backoff(&p.string1).ok()?;
            let t2 = set.term_or_backoff(&p.string2).ok()?;
            cos(&t1, &t2)
        }
        SimSetting::EntityPlusWord => {
            let (e1, e2) = ents()?;
            let (s1, s2) = strs()?;
            Some(cos(&e1, &e2)? + cos(&s1, &s2)?)
        }
        SimSetting::Cross => {
            let (e1, e2) = ents()?;
            let (s1, s2) = strs()?;
            Some(cos(&e1, &e2)? + cos(&s1, &s2)? + cos(&e1, &s2)? + cos(&e2, &s1)?)
        }
    }
}

/// Fractional ranks (1-based), ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Spearman's ρ: Pearson correlation of average-tie ranks.
pub fn spearman(gold: &[f64], pred: &[f64]) -> Result<f64> {
    if gold.len() != pred.len() {
        return Err(Error::Eval(format!(
            "score lists differ in length ({} vs {})",
            gold.len(),
            pred.len()
        )));
    }
    if gold.len() < 2 {
        return Err(Error::Eval("need at least 2 scores for a rank correlation".into()));
    }
    pearson(&average_ranks(gold), &average_ranks(pred))
        .map(|r| r.clamp(-1.0, 1.0))
        .ok_or_else(|| Error::Eval("rank correlation undefined for constant scores".into()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedPair {
    /// Index into the evaluated pair list.
    pub index: usize,
    pub score: f64,
    pub gold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimRelResult {
    pub rho: f64,
    pub covered: usize,
    pub total: usize,
    /// Covered pairs by descending score (ties by index).
    pub ranking: Vec<RankedPair>,
}

impl SimRelResult {
    pub fn coverage(&self) -> f64 {
        self.covered as f64 / self.total as f64
    }
}

/// Rank covered pairs by score and correlate with gold judgments.
/// Uncovered pairs are left out and reflected in the coverage.
pub fn eval_simrel(pairs: &[SimRelPair], set: &EmbeddingSet, setting: SimSetting) -> Result<SimRelResult> {
    let scores: Vec<Option<f64>> = pairs.iter().map(|p| pair_score(p, set, setting)).collect();
    simrel_from_scores(pairs, &scores)
}

/// Like [`eval_simrel`] but restricted to pairs that every `(set, setting)`
/// in `methods` can score, so different methods are compared on the same
/// subset.
pub fn eval_simrel_filtered(
    pairs: &[SimRelPair],
    set: &EmbeddingSet,
    setting: SimSetting,
    methods: &[(&EmbeddingSet, SimSetting)],
) -> Result<SimRelResult> {
    let keep: Vec<bool> = pairs
        .iter()
        .map(|p| methods.iter().all(|&(s, m)| pair_score(p, s, m).is_some()))
        .collect();
    if !keep.iter().any(|&k| k) {
        return Err(Error::Eval("no pair is covered by every method".into()));
    }
    let scores: Vec<Option<f64>> = pairs
        .iter()
        .zip(&keep)
        .map(|(p, &k)| if k { pair_score(p, set, setting) } else { None })
        .collect();
    let mut result = simrel_from_scores(pairs, &scores)?;
    result.total = keep.iter().filter(|&&k| k).count();
    Ok(result)
}

fn simrel_from_scores(pairs: &[SimRelPair], scores: &[Option<f64>]) -> Result<SimRelResult> {
    let mut ranking: Vec<RankedPair> = scores
        .iter()
        .enumerate()
        .filter_map(|(i, s)| {
            s.map(|score| RankedPair {
                index: i,
                score,
                gold: pairs[i].gold,
            })
        })
        .collect();
    if ranking.len() < 2 {
        return Err(Error::Eval(format!(
            "only {} of {} pairs covered; need at least 2",
            ranking.len(),
            pairs.len()
        )));
    }
    let gold: Vec<f64> = ranking.iter().map(|r| r.gold).collect();
    let pred: Vec<f64> = ranking.iter().map(|r| r.score).collect();
    let rho = spearman(&gold, &pred)?;
    ranking.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    Ok(SimRelResult {
        rho,
        covered: ranking.len(),
        total: pairs.len(),
        ranking,
    })
}

/// One side of an analogy: an entity and its surface string.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalogyItem {
    pub entity: EntityId,
    pub string: String,
}

/// `a : b :: c : ?` with one or more acceptable answers.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalogyInstance {
    pub a: AnalogyItem,
    pub b: AnalogyItem,
    pub c: AnalogyItem,
    pub answers: Vec<AnalogyItem>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalogyMode {
    Entity,
    Word,
    Oracle,
}

impl std::str::FromStr for AnalogyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entity" => Ok(AnalogyMode::Entity),
            "word" => Ok(AnalogyMode::Word),
            "oracle" => Ok(AnalogyMode::Oracle),
            _ => Err(Error::InvalidConfig(format!("unknown analogy mode {s:?}"))),
        }
    }
}

/// 3CosAdd: rank points of `kind` by cosine to `b − a + c`, skipping the
/// namespaced keys in `exclude`.
pub fn analogy_predict(
    set: &EmbeddingSet,
    a: &[f64],
    b: &[f64],
    c: &[f64],
    kind: PointKind,
    exclude: &HashSet<String>,
    topk: usize,
) -> Result<Vec<String>> {
    let target: Vec<f64> = a.iter().zip(b).zip(c).map(|((a, b), c)| b - a + c).collect();
    if target.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(set
        .nearest(&target, &[kind], topk, exclude)?
        .into_iter()
        .map(|n| n.key)
        .collect())
}

fn entity_analogy(inst: &AnalogyInstance, set: &EmbeddingSet) -> Result<bool> {
    let get = |item: &AnalogyItem| {
        entity_vec(set, &item.entity).ok_or_else(|| Error::UnknownKey(format!("ent:{}", item.entity)))
    };
    let (a, b, c) = (get(&inst.a)?, get(&inst.b)?, get(&inst.c)?);
    let exclude: HashSet<String> = [&inst.a, &inst.b, &inst.c]
        .iter()
        .map(|i| format!("ent:{}", i.entity))
        .collect();
    let top = analogy_predict(set, &a, &b, &c, PointKind::Entity, &exclude, 1)?;
    Ok(inst.answers.iter().any(|ans| ans.entity.as_str() == top[0]))
}

fn word_analogy(inst: &AnalogyInstance, set: &EmbeddingSet) -> Result<bool> {
    let a = set.string_vector(&inst.a.string)?;
    let b = set.string_vector(&inst.b.string)?;
    let c = set.string_vector(&inst.c.string)?;
    let exclude: HashSet<String> = [&inst.a, &inst.b, &inst.c]
        .iter()
        .flat_map(|i| normalize(&i.string))
        .map(|w| format!("word:{w}"))
        .collect();
    let top = analogy_predict(set, &a, &b, &c, PointKind::Word, &exclude, 1)?;
    Ok(inst.answers.iter().any(|ans| normalize(&ans.string).join(" ") == top[0]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalogyReport {
    pub correct: usize,
    pub total: usize,
    /// Instances that could not be represented (counted incorrect).
    pub unrepresentable: usize,
}

impl AnalogyReport {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Top-1 accuracy; an instance is correct if its top prediction is any of
/// the acceptable answers. Oracle mode counts an instance correct if either
/// the entity or the word prediction is.
pub fn eval_analogy(instances: &[AnalogyInstance], set: &EmbeddingSet, mode: AnalogyMode) -> AnalogyReport {
    let mut report = AnalogyReport {
        correct: 0,
        total: instances.len(),
        unrepresentable: 0,
    };
    for (i, inst) in instances.iter().enumerate() {
        let run = |f: fn(&AnalogyInstance, &EmbeddingSet) -> Result<bool>| match f(inst, set) {
            Ok(ok) => Some(ok),
            Err(e) => {
                log::debug!("analogy instance {i}: {e}");
                None
            }
        };
        let outcome = match mode {
            AnalogyMode::Entity => run(entity_analogy),
            AnalogyMode::Word => run(word_analogy),
            AnalogyMode::Oracle => match (run(entity_analogy), run(word_analogy)) {
                (None, None) => None,
                (e, w) => Some(e.unwrap_or(false) || w.unwrap_or(false)),
            },
        };
        match outcome {
            Some(true) => report.correct += 1,
            Some(false) => {}
            None => report.unrepresentable += 1,
        }
    }
    report
}

/// f(e, C) = cos(C, e) · ‖P(C, e)‖ / ‖e‖, with P the orthogonal projection
/// of C onto e.
pub fn wsd_score(entity: &[f64], context: &[f64]) -> Result<f64> {
    let cos = cosine(context, entity)?;
    let ee: f64 = entity.iter().map(|x| x * x).sum();
    let ce: f64 = context.iter().zip(entity).map(|(c, e)| c * e).sum();
    let coef = ce / ee;
    let proj_norm = entity.iter().map(|e| (coef * e).powi(2)).sum::<f64>().sqrt();
    Ok(cos * proj_norm / ee.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct WsdInstance {
    pub mention: String,
    pub context: Vec<String>,
    pub candidates: Vec<EntityId>,
    pub gold: EntityId,
}

/// Entity → definition strings.
pub type Definitions = HashMap<EntityId, Vec<String>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WsdOptions {
    /// Score with the learned entity vectors.
    pub use_entities: bool,
    /// Add the score of the averaged definition vector.
    pub use_definitions: bool,
    /// Multiply by cos(entity, mention vector).
    pub use_surface: bool,
}

impl Default for WsdOptions {
    fn default() -> Self {
        WsdOptions {
            use_entities: true,
            use_definitions: false,
            use_surface: false,
        }
    }
}

/// Mean of the in-vocabulary context word vectors.
pub fn context_vector<S: AsRef<str>>(context: &[S], set: &EmbeddingSet) -> Result<Vec<f64>> {
    let joined = context.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ");
    set.string_vector(&joined)
        .map_err(|_| Error::Eval("no in-vocabulary context words".into()))
}

fn definition_vector(entity: &EntityId, set: &EmbeddingSet, defs: &Definitions) -> Option<Vec<f64>> {
    let vecs: Vec<Vec<f64>> = defs
        .get(entity)?
        .iter()
        .filter_map(|d| set.string_vector(d).ok())
        .collect();
    if vecs.is_empty() {
        return None;
    }
    let mut mean = vec![0.0; set.dim()];
    for v in &vecs {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= vecs.len() as f64);
    Some(mean)
}

/// Score every candidate; candidates with no usable representation get −∞.
pub fn candidate_scores(
    inst: &WsdInstance,
    set: &EmbeddingSet,
    defs: &Definitions,
    opts: WsdOptions,
) -> Result<Vec<f64>> {
    let ctx = context_vector(&inst.context, set)?;
    let mention = if opts.use_surface {
        set.string_vector(&inst.mention).ok()
    } else {
        None
    };
    let scores = inst
        .candidates
        .iter()
        .map(|cand| {
            let ent = if opts.use_entities { entity_vec(set, cand) } else { None };
            let def = if opts.use_definitions {
                definition_vector(cand, set, defs)
            } else {
                None
            };
            let mut score = None;
            for v in [&ent, &def].into_iter().flatten() {
                if let Ok(s) = wsd_score(v, &ctx) {
                    *score.get_or_insert(0.0) += s;
                }
            }
            let Some(mut score) = score else {
                log::debug!("candidate {cand} for {:?} has no representation", inst.mention);
                return f64::NEG_INFINITY;
            };
            if let (Some(m), Some(v)) = (&mention, ent.as_ref().or(def.as_ref())) {
                if let Ok(c) = cosine(v, m) {
                    score *= c;
                }
            }
            score
        })
        .collect();
    Ok(scores)
}

/// Index of the highest score; ties go to the smallest entity id.
fn argmax(candidates: &[EntityId], scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..candidates.len() {
        let better = scores[i] > scores[best]
            || (scores[i] == scores[best] && candidates[i] < candidates[best]);
        if better {
            best = i;
        }
    }
    best
}

/// Predict the candidate that maximizes the combined score.
pub fn disambiguate(inst: &WsdInstance, set: &EmbeddingSet, defs: &Definitions, opts: WsdOptions) -> Result<EntityId> {
    if inst.candidates.is_empty() {
        return Err(Error::Eval("no candidates".into()));
    }
    let scores = candidate_scores(inst, set, defs, opts)?;
    Ok(inst.candidates[argmax(&inst.candidates, &scores)].clone())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WsdReport {
    pub correct: usize,
    pub total: usize,
    /// Instances whose context had no known words (counted incorrect).
    pub failed: usize,
    /// Mention → (correct, total).
    pub per_mention: BTreeMap<String, (usize, usize)>,
}

impl WsdReport {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    fn record(&mut self, mention: &str, ok: bool) {
        self.total += 1;
        let entry = self.per_mention.entry(mention.to_owned()).or_default();
        entry.1 += 1;
        if ok {
            self.correct += 1;
            entry.0 += 1;
        }
    }
}

/// Accuracy of [`disambiguate`] over `instances`.
pub fn eval_wsd(instances: &[WsdInstance], set: &EmbeddingSet, defs: &Definitions, opts: WsdOptions) -> WsdReport {
    eval_wsd_with(instances, |inst| {
        disambiguate(inst, set, defs, opts).map(|p| p == inst.gold)
    })
}

/// Accuracy of an arbitrary per-instance judge (`Ok(correct)`; errors count
/// as incorrect).
pub fn eval_wsd_with<F>(instances: &[WsdInstance], mut judge: F) -> WsdReport
where
    F: FnMut(&WsdInstance) -> Result<bool>,
{
    let mut report = WsdReport::default();
    for inst in instances {
        let ok = match judge(inst) {
            Ok(ok) => ok,
            Err(e) => {
                log::debug!("wsd instance {:?}: {e}", inst.mention);
                report.failed += 1;
                false
            }
        };
        report.record(&inst.mention, ok);
    }
    report
}

/// Entity-only, definitions-only, and oracle accuracies side by side.
#[derive(Clone, Debug, PartialEq)]
pub struct WsdOracleReport {
    pub entity: WsdReport,
    pub definitions: WsdReport,
    /// Correct if either the entity or the definition scorer is correct.
    pub oracle: WsdReport,
}

pub fn eval_wsd_oracle(
    instances: &[WsdInstance],
    set: &EmbeddingSet,
    defs: &Definitions,
    use_surface: bool,
) -> WsdOracleReport {
    let entity_opts = WsdOptions {
        use_entities: true,
        use_definitions: false,
        use_surface,
    };
    let def_opts = WsdOptions {
        use_entities: false,
        use_definitions: true,
        use_surface,
    };
    let judge = |inst: &WsdInstance, opts| disambiguate(inst, set, defs, opts).map(|p| p == inst.gold);
    WsdOracleReport {
        entity: eval_wsd_with(instances, |i| judge(i, entity_opts)),
        definitions: eval_wsd_with(instances, |i| judge(i, def_opts)),
        oracle: eval_wsd_with(instances, |i| {
            match (judge(i, entity_opts), judge(i, def_opts)) {
                (Err(e), Err(_)) => Err(e),
                (a, b) => Ok(a.unwrap_or(false) || b.unwrap_or(false)),
            }
        }),
    }
}

/// Accuracy of picking a uniformly random candidate.
pub fn random_baseline<R: Rng>(instances: &[WsdInstance], rng: &mut R) -> WsdReport {
    eval_wsd_with(instances, |inst| {
        let pick = rng.random_range(0..inst.candidates.len());
        Ok(inst.candidates[pick] == inst.gold)
    })
}

/// Accuracy of always predicting each mention's most frequent gold sense.
pub fn majority_baseline(instances: &[WsdInstance]) -> WsdReport {
    let mut counts: HashMap<&str, BTreeMap<&EntityId, usize>> = HashMap::new();
    for inst in instances {
        *counts.entry(&inst.mention).or_default().entry(&inst.gold).or_default() += 1;
    }
    let majority: HashMap<&str, &EntityId> = counts
        .iter()
        .map(|(m, c)| {
            // BTreeMap order makes the smallest id win ties.
            let best = c.iter().rev().max_by_key(|(_, &n)| n).map(|(e, _)| *e).unwrap();
            (*m, best)
        })
        .collect();
    eval_wsd_with(instances, |inst| Ok(majority[inst.mention.as_str()] == &inst.gold))
}

// ---- dataset readers ----

fn data_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(e.into())),
        Ok(l) => {
            let l = l.trim_end_matches('\r').to_owned();
            if l.trim().is_empty() || l.starts_with('#') {
                None
            } else {
                Some(Ok((i + 1, l)))
            }
        }
    })
}

fn fields(line: &str, lineno: usize, n: usize) -> Result<Vec<&str>> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != n {
        return Err(Error::Format {
            line: lineno,
            message: format!("expected {n} tab-separated fields, found {}", f.len()),
        });
    }
    Ok(f)
}

fn entity_field(s: &str, lineno: usize) -> Result<EntityId> {
    EntityId::new(s.trim()).map_err(|e| Error::Format {
        line: lineno,
        message: e.to_string(),
    })
}

/// `string1 TAB string2 TAB entity1 TAB entity2 TAB gold`.
pub fn read_simrel<R: BufRead>(reader: R) -> Result<Vec<SimRelPair>> {
    data_lines(reader)
        .map(|line| {
            let (n, line) = line?;
            let f = fields(&line, n, 5)?;
            let gold: f64 = f[4].trim().parse().map_err(|_| Error::Format {
                line: n,
                message: format!("bad gold score {:?}", f[4]),
            })?;
            if !gold.is_finite() {
                return Err(Error::Format {
                    line: n,
                    message: "gold score is not finite".into(),
                });
            }
            Ok(SimRelPair {
                string1: f[0].to_owned(),
                string2: f[1].to_owned(),
                entity1: entity_field(f[2], n)?,
                entity2: entity_field(f[3], n)?,
                gold,
            })
        })
        .collect()
}

/// `a_ent a_str b_ent b_str c_ent c_str answers`, tab-separated; answers
/// are comma-separated `ent|str` pairs.
pub fn read_analogies<R: BufRead>(reader: R) -> Result<Vec<AnalogyInstance>> {
    data_lines(reader)
        .map(|line| {
            let (n, line) = line?;
            let f = fields(&line, n, 7)?;
            let item = |e: &str, s: &str| -> Result<AnalogyItem> {
                Ok(AnalogyItem {
                    entity: entity_field(e, n)?,
                    string: s.to_owned(),
                })
            };
            let answers = f[6]
                .split(',')
                .filter(|a| !a.trim().is_empty())
                .map(|a| {
                    let (e, s) = a.split_once('|').ok_or_else(|| Error::Format {
                        line: n,
                        message: format!("answer {a:?} is not of the form ent|str"),
                    })?;
                    item(e, s)
                })
                .collect::<Result<Vec<_>>>()?;
            if answers.is_empty() {
                return Err(Error::Format {
                    line: n,
                    message: "no answers".into(),
                });
            }
            Ok(AnalogyInstance {
                a: item(f[0], f[1])?,
                b: item(f[2], f[3])?,
                c: item(f[4], f[5])?,
                answers,
            })
        })
        .collect()
}

/// `mention TAB gold TAB candidates(comma-separated) TAB context`.
pub fn read_wsd<R: BufRead>(reader: R) -> Result<Vec<WsdInstance>> {
    data_lines(reader)
        .map(|line| {
            let (n, line) = line?;
            let f = fields(&line, n, 4)?;
            let gold = entity_field(f[1], n)?;
            let candidates = f[2]
                .split(',')
                .filter(|c| !c.trim().is_empty())
                .map(|c| entity_field(c, n))
                .collect::<Result<Vec<_>>>()?;
            if candidates.len() < 2 {
                return Err(Error::Format {
                    line: n,
                    message: "need at least 2 candidates".into(),
                });
            }
            if !candidates.contains(&gold) {
                return Err(Error::Format {
                    line: n,
                    message: format!("gold {gold} is not among the candidates"),
                });
            }
            Ok(WsdInstance {
                mention: f[0].to_owned(),
                context: normalize(f[3]),
                candidates,
                gold,
            })
        })
        .collect()
}

/// `entity TAB definition`; an entity may appear on several lines.
pub fn read_definitions<R: BufRead>(reader: R) -> Result<Definitions> {
    let mut defs = Definitions::new();
    for line in data_lines(reader) {
        let (n, line) = line?;
        let f = fields(&line, n, 2)?;
        defs.entry(entity_field(f[0], n)?)
            .or_default()
            .push(f[1].to_owned());
    }
    Ok(defs)
}

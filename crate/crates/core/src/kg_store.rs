//! Triple ingestion, vocabularies, and the per-pattern indexes.
//!
//! A *pattern* is the pair left untouched when one slot of a triple is
//! corrupted: `(h, r)` when the tail is replaced and `(r, t)` when the head is
//! replaced. [`PatternIndex`] groups the training facts by pattern;
//! [`FilterIndex`] does the same over every split and backs the filtered
//! ranking protocol.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub type EntityId = u32;
pub type RelationId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub const fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head, self.relation, self.tail)
    }
}

/// The corrupted slot of a triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Head,
    Tail,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Head, Side::Tail];

    /// Entity currently occupying this slot.
    pub fn entity(self, triple: &Triple) -> EntityId {
        match self {
            Side::Head => triple.head,
            Side::Tail => triple.tail,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Head => "head",
            Side::Tail => "tail",
        }
    }
}

/// The invariant pair of a corrupted triple plus which slot is open.
///
/// `side == Tail` is the `(h, r)` pattern (anchor = head); `side == Head` is
/// the `(r, t)` pattern (anchor = tail).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    pub side: Side,
    pub anchor: EntityId,
    pub relation: RelationId,
}

impl Pattern {
    pub fn of(triple: &Triple, side: Side) -> Self {
        let anchor = match side {
            Side::Head => triple.tail,
            Side::Tail => triple.head,
        };
        Pattern {
            side,
            anchor,
            relation: triple.relation,
        }
    }

    /// Fills the open slot with `entity`.
    pub fn complete(&self, entity: EntityId) -> Triple {
        match self.side {
            Side::Head => Triple::new(entity, self.relation, self.anchor),
            Side::Tail => Triple::new(self.anchor, self.relation, entity),
        }
    }

    /// Packed `(anchor, relation)` key; the side selects which map it lives in.
    #[inline]
    pub fn key(&self) -> u64 {
        pack(self.anchor, self.relation)
    }

    fn from_key(side: Side, key: u64) -> Self {
        Pattern {
            side,
            anchor: (key >> 32) as EntityId,
            relation: key as u32,
        }
    }
}

#[inline]
fn pack(anchor: EntityId, relation: RelationId) -> u64 {
    (u64::from(anchor) << 32) | u64::from(relation)
}

/// Entity and relation dictionaries with dense ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    entity_ids: HashMap<String, EntityId>,
    relation_ids: HashMap<String, RelationId>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary from ordered name lists; names must be unique.
    pub fn from_names(entities: Vec<String>, relations: Vec<String>) -> Result<Self> {
        let mut vocab = Vocab::new();
        for name in entities {
            if vocab.entity_ids.contains_key(&name) {
                return Err(Error::Vocabulary(format!("duplicate entity name {name:?}")));
            }
            vocab.intern_entity(&name);
        }
        for name in relations {
            if vocab.relation_ids.contains_key(&name) {
                return Err(Error::Vocabulary(format!(
                    "duplicate relation name {name:?}"
                )));
            }
            vocab.intern_relation(&name);
        }
        Ok(vocab)
    }

    /// Reads `entities.dict`/`relations.dict` style files (`id<TAB>name`).
    pub fn from_dict_files(entities: &Path, relations: &Path) -> Result<Self> {
        Vocab::from_names(read_dict(entities)?, read_dict(relations)?)
    }

    pub fn intern_entity(&mut self, name: &str) -> EntityId {
        intern(&mut self.entity_names, &mut self.entity_ids, name)
    }

    pub fn intern_relation(&mut self, name: &str) -> RelationId {
        intern(&mut self.relation_names, &mut self.relation_ids, name)
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_ids.get(name).copied()
    }

    pub fn entity_name(&self, id: EntityId) -> Option<&str> {
        self.entity_names.get(id as usize).map(String::as_str)
    }

    pub fn relation_name(&self, id: RelationId) -> Option<&str> {
        self.relation_names.get(id as usize).map(String::as_str)
    }

    pub fn num_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_names.len()
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entity_names
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relation_names
    }

    /// Writes `id<TAB>name` dictionaries.
    pub fn write_dicts(&self, entities: &Path, relations: &Path) -> Result<()> {
        write_dict(entities, &self.entity_names)?;
        write_dict(relations, &self.relation_names)
    }
}

fn intern(names: &mut Vec<String>, ids: &mut HashMap<String, u32>, name: &str) -> u32 {
    if let Some(&id) = ids.get(name) {
        return id;
    }
    let id = names.len() as u32;
    names.push(name.to_owned());
    ids.insert(name.to_owned(), id);
    id
}

fn read_dict(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            message,
        };
        let (id, name) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected id<TAB>name".into()))?;
        let id: usize = id
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("bad id {id:?}")))?;
        entries.push((id, name.to_owned()));
    }
    entries.sort_by_key(|(id, _)| *id);
    for (expected, (id, _)) in entries.iter().enumerate() {
        if *id != expected {
            return Err(Error::Vocabulary(format!(
                "{}: ids are not dense (missing {expected})",
                path.display()
            )));
        }
    }
    Ok(entries.into_iter().map(|(_, name)| name).collect())
}

fn write_dict(path: &Path, names: &[String]) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for (id, name) in names.iter().enumerate() {
        writeln!(out, "{id}\t{name}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// A duplicate-free list of encoded facts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripleSet {
    triples: Vec<Triple>,
}

impl TripleSet {
    /// Rejects duplicates.
    pub fn new(triples: Vec<Triple>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(triples.len());
        for t in &triples {
            if !seen.insert(*t) {
                return Err(Error::Duplicate(t.to_string()));
            }
        }
        Ok(TripleSet { triples })
    }

    /// Drops repeated triples, keeping first occurrences in order.
    pub fn dedup(triples: Vec<Triple>) -> (Self, usize) {
        let mut seen = HashSet::with_capacity(triples.len());
        let before = triples.len();
        let triples: Vec<Triple> = triples.into_iter().filter(|t| seen.insert(*t)).collect();
        let dropped = before - triples.len();
        (TripleSet { triples }, dropped)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn as_slice(&self) -> &[Triple] {
        &self.triples
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Triple> {
        self.triples.iter()
    }

    /// Checks every id against the vocabulary bounds.
    pub fn check_bounds(&self, num_entities: usize, num_relations: usize) -> Result<()> {
        for t in &self.triples {
            if t.head as usize >= num_entities
                || t.tail as usize >= num_entities
                || t.relation as usize >= num_relations
            {
                return Err(Error::Vocabulary(format!("triple {t} out of vocabulary bounds")));
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a TripleSet {
    type Item = &'a Triple;
    type IntoIter = std::slice::Iter<'a, Triple>;

    fn into_iter(self) -> Self::IntoIter {
        self.triples.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DuplicatePolicy {
    #[default]
    Reject,
    /// Drop repeats and log a warning.
    Dedup,
}

/// Loads a TSV triple file.
///
/// Without `vocab` a fresh vocabulary is built in first-appearance order.
/// With `vocab`, names outside it are an error and the returned vocabulary is
/// a copy of the input.
pub fn load_triples(path: &Path, vocab: Option<&Vocab>) -> Result<(TripleSet, Vocab)> {
    load_triples_with(path, vocab, DuplicatePolicy::Reject)
}

pub fn load_triples_with(
    path: &Path,
    vocab: Option<&Vocab>,
    duplicates: DuplicatePolicy,
) -> Result<(TripleSet, Vocab)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_triples(file, path, vocab, duplicates)
}

/// Same as [`load_triples_with`] over any reader; `origin` labels errors.
pub fn parse_triples<R: Read>(
    reader: R,
    origin: &Path,
    vocab: Option<&Vocab>,
    duplicates: DuplicatePolicy,
) -> Result<(TripleSet, Vocab)> {
    let fixed = vocab.is_some();
    let mut vocab = vocab.cloned().unwrap_or_default();
    let mut triples = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: origin.to_owned(),
                line: i + 1,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let (h, r, t) = (fields[0], fields[1], fields[2]);
        let triple = if fixed {
            let lookup_entity = |name: &str| {
                vocab.entity_id(name).ok_or_else(|| {
                    Error::Vocabulary(format!(
                        "{}:{}: unknown entity {name:?}",
                        origin.display(),
                        i + 1
                    ))
                })
            };
            let relation = vocab.relation_id(r).ok_or_else(|| {
                Error::Vocabulary(format!(
                    "{}:{}: unknown relation {r:?}",
                    origin.display(),
                    i + 1
                ))
            })?;
            Triple::new(lookup_entity(h)?, relation, lookup_entity(t)?)
        } else {
            let head = vocab.intern_entity(h);
            let relation = vocab.intern_relation(r);
            let tail = vocab.intern_entity(t);
            Triple::new(head, relation, tail)
        };
        triples.push(triple);
    }
    let set = match duplicates {
        DuplicatePolicy::Reject => TripleSet::new(triples).map_err(|e| match e {
            Error::Duplicate(t) => Error::Duplicate(format!("{t} in {}", origin.display())),
            other => other,
        })?,
        DuplicatePolicy::Dedup => {
            let (set, dropped) = TripleSet::dedup(triples);
            if dropped > 0 {
                log::warn!("{}: dropped {dropped} duplicate triples", origin.display());
            }
            set
        }
    };
    Ok((set, vocab))
}

/// Writes triples as `head<TAB>relation<TAB>tail` names.
pub fn write_triples(path: &Path, triples: &TripleSet, vocab: &Vocab) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for t in triples {
        let name = |id: Option<&str>| id.map(str::to_owned).unwrap_or_default();
        writeln!(
            out,
            "{}\t{}\t{}",
            name(vocab.entity_name(t.head)),
            name(vocab.relation_name(t.relation)),
            name(vocab.entity_name(t.tail))
        )
        .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Training, validation, and test splits over one vocabulary.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub vocab: Vocab,
    pub train: TripleSet,
    pub valid: TripleSet,
    pub test: TripleSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "valid" => Some(Split::Valid),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetPaths {
    pub train: PathBuf,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub entities_dict: Option<PathBuf>,
    pub relations_dict: Option<PathBuf>,
}

impl Dataset {
    /// Loads all splits. The vocabulary comes from the dictionary files when
    /// both are given, otherwise from the train file.
    pub fn load(paths: &DatasetPaths, duplicates: DuplicatePolicy) -> Result<Self> {
        let dict_vocab = match (&paths.entities_dict, &paths.relations_dict) {
            (Some(e), Some(r)) => Some(Vocab::from_dict_files(e, r)?),
            (None, None) => None,
            _ => {
                return Err(Error::config(
                    "entity and relation dictionaries must be given together",
                ))
            }
        };
        let (train, vocab) = load_triples_with(&paths.train, dict_vocab.as_ref(), duplicates)?;
        let load_split = |p: &Option<PathBuf>| -> Result<TripleSet> {
            match p {
                Some(p) => Ok(load_triples_with(p, Some(&vocab), duplicates)?.0),
                None => Ok(TripleSet::default()),
            }
        };
        let valid = load_split(&paths.valid)?;
        let test = load_split(&paths.test)?;
        Ok(Dataset {
            vocab,
            train,
            valid,
            test,
        })
    }

    pub fn split(&self, split: Split) -> &TripleSet {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn num_entities(&self) -> usize {
        self.vocab.num_entities()
    }

    pub fn num_relations(&self) -> usize {
        self.vocab.num_relations()
    }
}

/// Training facts grouped by `(h, r)` and `(r, t)` patterns.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatternIndex {
    tails_by_hr: HashMap<u64, Vec<EntityId>>,
    heads_by_rt: HashMap<u64, Vec<EntityId>>,
}

impl PatternIndex {
    pub fn build(triples: &[Triple]) -> Self {
        Self::build_from(triples.iter())
    }

    fn build_from<'a>(triples: impl Iterator<Item = &'a Triple>) -> Self {
        let mut index = PatternIndex::default();
        for t in triples {
            index
                .tails_by_hr
                .entry(pack(t.head, t.relation))
                .or_default()
                .push(t.tail);
            index
                .heads_by_rt
                .entry(pack(t.tail, t.relation))
                .or_default()
                .push(t.head);
        }
        for list in index
            .tails_by_hr
            .values_mut()
            .chain(index.heads_by_rt.values_mut())
        {
            list.sort_unstable();
            list.dedup();
        }
        index
    }

    fn map(&self, side: Side) -> &HashMap<u64, Vec<EntityId>> {
        match side {
            Side::Tail => &self.tails_by_hr,
            Side::Head => &self.heads_by_rt,
        }
    }

    /// Sorted entities completing `pattern` into a known fact.
    pub fn entities(&self, pattern: &Pattern) -> Option<&[EntityId]> {
        self.map(pattern.side)
            .get(&pattern.key())
            .map(Vec::as_slice)
    }

    /// `|T_pattern|`, zero for unseen patterns.
    pub fn count(&self, pattern: &Pattern) -> usize {
        self.entities(pattern).map_or(0, <[_]>::len)
    }

    pub fn contains(&self, pattern: &Pattern, entity: EntityId) -> bool {
        self.entities(pattern)
            .is_some_and(|list| list.binary_search(&entity).is_ok())
    }

    pub fn contains_triple(&self, triple: &Triple) -> bool {
        self.contains(&Pattern::of(triple, Side::Tail), triple.tail)
    }

    pub fn num_patterns(&self, side: Side) -> usize {
        self.map(side).len()
    }

    /// All patterns on one side, in ascending key order.
    pub fn patterns(&self, side: Side) -> Vec<(Pattern, &[EntityId])> {
        let mut out: Vec<_> = self
            .map(side)
            .iter()
            .map(|(&k, v)| (Pattern::from_key(side, k), v.as_slice()))
            .collect();
        out.sort_unstable_by_key(|(p, _)| *p);
        out
    }

    /// Flattens the `(h, r)` side back into triples, sorted.
    pub fn triples(&self) -> Vec<Triple> {
        let mut out: Vec<Triple> = self
            .patterns(Side::Tail)
            .into_iter()
            .flat_map(|(p, tails)| tails.iter().map(move |&e| p.complete(e)))
            .collect();
        out.sort_unstable();
        out
    }
}

/// Known facts over every split, for filtered ranking and leakage filtering.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterIndex(PatternIndex);

impl FilterIndex {
    pub fn build(splits: &[&TripleSet]) -> Self {
        FilterIndex(PatternIndex::build_from(
            splits.iter().flat_map(|s| s.iter()),
        ))
    }

    pub fn from_dataset(data: &Dataset) -> Self {
        Self::build(&[&data.train, &data.valid, &data.test])
    }

    /// True iff `pattern` completed with `entity` is a known fact.
    pub fn contains(&self, pattern: &Pattern, entity: EntityId) -> bool {
        self.0.contains(pattern, entity)
    }

    pub fn contains_triple(&self, triple: &Triple) -> bool {
        self.0.contains_triple(triple)
    }

    pub fn index(&self) -> &PatternIndex {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn parse(text: &str) -> Result<(TripleSet, Vocab)> {
        parse_triples(
            text.as_bytes(),
            Path::new("mem"),
            None,
            DuplicatePolicy::Reject,
        )
    }

    #[test]
    fn three_line_file() {
        let (set, vocab) = parse("a\tr\tb\na\tr\tc\nb\ts\ta\n").unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(vocab.num_entities(), 3);
        assert_eq!(vocab.num_relations(), 2);
        assert_eq!(vocab.entity_names(), ["a", "b", "c"]);
        assert_eq!(set.as_slice()[2], Triple::new(1, 1, 0));
    }

    #[test]
    fn empty_input() {
        let (set, vocab) = parse("").unwrap();
        assert!(set.is_empty());
        assert_eq!(vocab.num_entities(), 0);
        assert_eq!(vocab.num_relations(), 0);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse("a\tr\tb\n\na\tr\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fixed_vocab_rejects_unknown_names() {
        let (_, vocab) = parse("a\tr\tb\n").unwrap();
        let err = parse_triples(
            "a\tr\tz\n".as_bytes(),
            Path::new("test"),
            Some(&vocab),
            DuplicatePolicy::Reject,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Vocabulary(_)));
        let err = parse_triples(
            "a\tq\tb\n".as_bytes(),
            Path::new("test"),
            Some(&vocab),
            DuplicatePolicy::Reject,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Vocabulary(_)));
    }

    #[test]
    fn duplicates_rejected_or_dropped() {
        assert!(matches!(
            parse("a\tr\tb\na\tr\tb\n").unwrap_err(),
            Error::Duplicate(_)
        ));
        let (set, _) = parse_triples(
            "a\tr\tb\na\tr\tb\n".as_bytes(),
            Path::new("mem"),
            None,
            DuplicatePolicy::Dedup,
        )
        .unwrap();
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn vocab_round_trip_and_uniqueness() {
        let vocab = Vocab::from_names(vec!["x".into(), "y".into()], vec!["r".into()]).unwrap();
        for id in 0..2 {
            let name = vocab.entity_name(id).unwrap();
            assert_eq!(vocab.entity_id(name), Some(id));
        }
        assert!(Vocab::from_names(vec!["x".into(), "x".into()], vec![]).is_err());
    }

    #[test]
    fn dict_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let vocab = Vocab::from_names(
            vec!["alpha".into(), "beta gamma".into()],
            vec!["rel".into()],
        )
        .unwrap();
        let (e, r) = (dir.path().join("e.dict"), dir.path().join("r.dict"));
        vocab.write_dicts(&e, &r).unwrap();
        assert_eq!(Vocab::from_dict_files(&e, &r).unwrap(), vocab);
    }

    #[test]
    fn pattern_index_groups_direct() {
        // (a,r,b), (c,r,b) with a=0, b=1, c=2
        let index = PatternIndex::build(&[Triple::new(0, 0, 1), Triple::new(2, 0, 1)]);
        let rt = Pattern {
            side: Side::Head,
            anchor: 1,
            relation: 0,
        };
        assert_eq!(index.entities(&rt), Some(&[0, 2][..]));
        assert_eq!(index.count(&rt), 2);
        let hr_a = Pattern {
            side: Side::Tail,
            anchor: 0,
            relation: 0,
        };
        let hr_c = Pattern {
            side: Side::Tail,
            anchor: 2,
            relation: 0,
        };
        assert_eq!(index.entities(&hr_a), Some(&[1][..]));
        assert_eq!(index.entities(&hr_c), Some(&[1][..]));
    }

    #[test]
    fn single_triple_index() {
        let t = Triple::new(0, 0, 1);
        let index = PatternIndex::build(&[t]);
        for side in Side::BOTH {
            assert_eq!(index.num_patterns(side), 1);
            assert_eq!(index.count(&Pattern::of(&t, side)), 1);
        }
    }

    fn random_triples(seed: u64, n: usize, ne: u32, nr: u32) -> Vec<Triple> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        while out.len() < n {
            let t = Triple::new(
                rng.random_range(0..ne),
                rng.random_range(0..nr),
                rng.random_range(0..ne),
            );
            if seen.insert(t) {
                out.push(t);
            }
        }
        out
    }

    #[test]
    fn pattern_index_matches_group_by_oracle() {
        let triples = random_triples(3, 50, 12, 3);
        let index = PatternIndex::build(&triples);
        let mut by_hr: BTreeMap<(u32, u32), Vec<u32>> = BTreeMap::new();
        let mut by_rt: BTreeMap<(u32, u32), Vec<u32>> = BTreeMap::new();
        for t in &triples {
            by_hr.entry((t.head, t.relation)).or_default().push(t.tail);
            by_rt.entry((t.relation, t.tail)).or_default().push(t.head);
        }
        assert_eq!(index.num_patterns(Side::Tail), by_hr.len());
        assert_eq!(index.num_patterns(Side::Head), by_rt.len());
        for ((h, r), mut tails) in by_hr {
            tails.sort();
            let p = Pattern {
                side: Side::Tail,
                anchor: h,
                relation: r,
            };
            assert_eq!(index.entities(&p).unwrap(), tails.as_slice());
        }
        for ((r, t), mut heads) in by_rt {
            heads.sort();
            let p = Pattern {
                side: Side::Head,
                anchor: t,
                relation: r,
            };
            assert_eq!(index.entities(&p).unwrap(), heads.as_slice());
        }
        let mut sorted = triples.clone();
        sorted.sort();
        assert_eq!(index.triples(), sorted);
    }

    #[test]
    fn filter_membership() {
        // train={(a,r,b)}, test={(a,r,c)}; a=0 b=1 c=2
        let train = TripleSet::new(vec![Triple::new(0, 0, 1)]).unwrap();
        let test = TripleSet::new(vec![Triple::new(0, 0, 2)]).unwrap();
        let filter = FilterIndex::build(&[&train, &TripleSet::default(), &test]);
        let ar = Pattern {
            side: Side::Tail,
            anchor: 0,
            relation: 0,
        };
        assert!(filter.contains(&ar, 2));
        assert!(filter.contains(&ar, 1));
        assert!(!filter.contains(&ar, 0));
    }

    #[test]
    fn filter_of_disjoint_splits_sums_sizes() {
        let all = random_triples(9, 60, 15, 4);
        let train = TripleSet::new(all[..40].to_vec()).unwrap();
        let valid = TripleSet::new(all[40..50].to_vec()).unwrap();
        let test = TripleSet::new(all[50..].to_vec()).unwrap();
        let filter = FilterIndex::build(&[&train, &valid, &test]);
        let total: usize = filter
            .index()
            .patterns(Side::Tail)
            .iter()
            .map(|(_, v)| v.len())
            .sum();
        assert_eq!(total, 60);
        let train_index = PatternIndex::build(train.as_slice());
        for side in Side::BOTH {
            for (p, entities) in train_index.patterns(side) {
                for &e in entities {
                    assert!(filter.contains(&p, e));
                }
            }
        }
        let only_train = FilterIndex::build(&[&train, &TripleSet::default(), &TripleSet::default()]);
        assert_eq!(only_train.index(), &train_index);
    }
}

//! Labeled pages, vocabularies, class weights and dataset splits.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dom::{self, TextBlock, CONTENT};
use crate::par::Exec;
use crate::{Error, Result};

/// Attribute that marks annotated content regions.
pub const GOLD_ATTR: &str = "data-gold";

pub const DEFAULT_TAG_VOCAB: usize = 50;
pub const DEFAULT_WORD_VOCAB: usize = 1000;

/// A page whose blocks all carry a gold label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledPage {
    pub source_id: String,
    pub blocks: Vec<TextBlock>,
}

impl LabeledPage {
    pub fn labels(&self) -> impl Iterator<Item = u8> + '_ {
        self.blocks.iter().map(|b| b.label.expect("labeled page"))
    }
}

/// Parse `html` and label every block by ancestor propagation of
/// `label_attr="content"`.
pub fn labeled_page_from_bytes(source_id: &str, html: &[u8], label_attr: &str) -> Result<LabeledPage> {
    let doc = dom::parse(html)?;
    let blocks: Vec<TextBlock> = dom::collect_blocks(&doc, Some(label_attr))
        .into_iter()
        .map(|(b, _)| b)
        .collect();
    if blocks.is_empty() {
        return Err(Error::EmptyPage(source_id.to_string()));
    }
    Ok(LabeledPage {
        source_id: source_id.to_string(),
        blocks,
    })
}

pub fn load_labeled_page(file: impl AsRef<Path>, label_attr: &str) -> Result<LabeledPage> {
    let file = file.as_ref();
    let bytes = fs::read(file)?;
    labeled_page_from_bytes(&file.to_string_lossy(), &bytes, label_attr)
}

/// `.html` / `.htm` files directly inside `dir`, sorted by path.
pub fn list_pages(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let is_html = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("html") || e.eq_ignore_ascii_case("htm"));
        if is_html && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Load the given files, keeping input order. Pages without blocks are
/// skipped with a warning since they cannot contribute to training.
pub fn load_labeled_pages(files: &[PathBuf], label_attr: &str, exec: Exec) -> Result<Vec<LabeledPage>> {
    let loaded = exec.map(files, |f| load_labeled_page(f, label_attr));
    let mut pages = Vec::with_capacity(loaded.len());
    for page in loaded {
        match page {
            Ok(p) => pages.push(p),
            Err(Error::EmptyPage(id)) => log::warn!("skipping `{id}`: no text blocks"),
            Err(e) => return Err(e),
        }
    }
    Ok(pages)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VocabEntry {
    pub name: String,
    pub count: u64,
}

/// The k most frequent tags and l most frequent words of a training corpus.
///
/// Encoded blocks have `d = k + l + 2` dimensions: one slot per known tag,
/// a tag out-of-vocabulary slot, one slot per known word, and a word
/// out-of-vocabulary slot.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    tags: Vec<VocabEntry>,
    words: Vec<VocabEntry>,
    tag_index: HashMap<String, usize>,
    word_index: HashMap<String, usize>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tags == other.tags && self.words == other.words
    }
}

impl Eq for Vocabulary {}

impl Vocabulary {
    pub fn new(tags: Vec<VocabEntry>, words: Vec<VocabEntry>) -> Result<Self> {
        let tag_index = index(&tags, "tag")?;
        let word_index = index(&words, "word")?;
        Ok(Self {
            tags,
            words,
            tag_index,
            word_index,
        })
    }

    pub fn tags(&self) -> &[VocabEntry] {
        &self.tags
    }

    pub fn words(&self) -> &[VocabEntry] {
        &self.words
    }

    pub fn k(&self) -> usize {
        self.tags.len()
    }

    pub fn l(&self) -> usize {
        self.words.len()
    }

    pub fn d(&self) -> usize {
        self.k() + self.l() + 2
    }

    pub fn tag_slot(&self, tag: &str) -> usize {
        self.tag_index.get(tag).copied().unwrap_or(self.k())
    }

    pub fn word_slot(&self, word: &str) -> usize {
        let offset = self.k() + 1;
        offset + self.word_index.get(word).copied().unwrap_or(self.l())
    }

    /// Plain-text form: a `k=<k> l=<l>` header followed by one
    /// `tag|word<TAB>name<TAB>count` line per entry in slot order.
    pub fn to_text(&self) -> String {
        let mut out = format!("k={} l={}\n", self.k(), self.l());
        for e in &self.tags {
            let _ = writeln!(out, "tag\t{}\t{}", e.name, e.count);
        }
        for e in &self.words {
            let _ = writeln!(out, "word\t{}\t{}", e.name, e.count);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, reason: &str| Error::VocabularyFormat {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let (k, l) = header
            .strip_prefix("k=")
            .and_then(|rest| rest.split_once(" l="))
            .and_then(|(k, l)| Some((k.parse::<usize>().ok()?, l.parse::<usize>().ok()?)))
            .ok_or_else(|| bad(1, "expected `k=<int> l=<int>`"))?;
        let mut tags = Vec::with_capacity(k);
        let mut words = Vec::with_capacity(l);
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let mut fields = line.split('\t');
            let (Some(kind), Some(name), Some(count), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(bad(lineno, "expected three tab-separated fields"));
            };
            let count = count.parse().map_err(|_| bad(lineno, "count is not an integer"))?;
            let entry = VocabEntry {
                name: name.to_string(),
                count,
            };
            match kind {
                "tag" if words.is_empty() => tags.push(entry),
                "word" => words.push(entry),
                "tag" => return Err(bad(lineno, "tag entry after word entries")),
                _ => return Err(bad(lineno, "entry kind must be `tag` or `word`")),
            }
        }
        if tags.len() != k || words.len() != l {
            return Err(bad(1, "header counts disagree with entries"));
        }
        Self::new(tags, words)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(fs::write(path, self.to_text())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

fn index(entries: &[VocabEntry], what: &str) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::with_capacity(entries.len());
    for (i, e) in entries.iter().enumerate() {
        if map.insert(e.name.clone(), i).is_some() {
            return Err(Error::Parameter(format!("duplicate {what} `{}` in vocabulary", e.name)));
        }
    }
    Ok(map)
}

/// Highest counts first, ties in lexicographic order.
fn top(freq: BTreeMap<&str, u64>, n: usize) -> Vec<VocabEntry> {
    let mut ranked: Vec<_> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked
        .into_iter()
        .take(n)
        .map(|(name, count)| VocabEntry {
            name: name.to_string(),
            count,
        })
        .collect()
}

/// Build the tag/word vocabulary from training pages.
///
/// Tag frequency is the total number of path occurrences, word frequency the
/// total number of token occurrences.
pub fn build_vocabulary(pages: &[LabeledPage], k: usize, l: usize) -> Result<Vocabulary> {
    if k == 0 || l == 0 {
        return Err(Error::Parameter("vocabulary sizes k and l must be positive".into()));
    }
    if pages.is_empty() {
        return Err(Error::Parameter("cannot build a vocabulary from zero pages".into()));
    }
    let mut tag_freq: BTreeMap<&str, u64> = BTreeMap::new();
    let mut word_freq: BTreeMap<&str, u64> = BTreeMap::new();
    for block in pages.iter().flat_map(|p| &p.blocks) {
        for (tag, &n) in &block.tag_counts {
            *tag_freq.entry(tag).or_insert(0) += u64::from(n);
        }
        for tok in &block.tokens {
            *word_freq.entry(tok).or_insert(0) += 1;
        }
    }
    Vocabulary::new(top(tag_freq, k), top(word_freq, l))
}

/// Load exactly the given training sources through `load` and build the
/// vocabulary from them. Nothing outside `sources` is touched.
pub fn build_vocabulary_from<S>(
    sources: &[S],
    load: impl FnMut(&S) -> Result<LabeledPage>,
    k: usize,
    l: usize,
) -> Result<Vocabulary> {
    let pages = sources.iter().map(load).collect::<Result<Vec<_>>>()?;
    build_vocabulary(&pages, k, l)
}

/// Per-class loss weights `w_c = n / (2 n_c)`, so that `w0 n0 = w1 n1 = n / 2`.
pub fn class_weights(pages: &[LabeledPage]) -> Result<(f64, f64)> {
    let (mut n0, mut n1) = (0usize, 0usize);
    for label in pages.iter().flat_map(LabeledPage::labels) {
        if label == CONTENT {
            n1 += 1;
        } else {
            n0 += 1;
        }
    }
    class_weights_from_counts(n0, n1)
}

pub fn class_weights_from_counts(n0: usize, n1: usize) -> Result<(f64, f64)> {
    if n0 == 0 || n1 == 0 {
        return Err(Error::DegenerateCorpus(format!(
            "need blocks of both classes, found {n0} boilerplate and {n1} content"
        )));
    }
    let n = (n0 + n1) as f64;
    Ok((n / (2.0 * n0 as f64), n / (2.0 * n1 as f64)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_count: usize,
    pub val_count: usize,
    pub test_count: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn total(&self) -> usize {
        self.train_count + self.val_count + self.test_count
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded uniform shuffle followed by contiguous train/val/test assignment.
pub fn split_dataset<T>(items: Vec<T>, spec: &SplitSpec) -> Result<Split<T>> {
    if spec.total() != items.len() {
        return Err(Error::SplitMismatch {
            requested: spec.total(),
            available: items.len(),
        });
    }
    let mut items = items;
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test = items.split_off(spec.train_count + spec.val_count);
    let val = items.split_off(spec.train_count);
    Ok(Split {
        train: items,
        val,
        test,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(SplitName::Train),
            "val" => Some(SplitName::Val),
            "test" => Some(SplitName::Test),
            _ => None,
        }
    }
}

/// Page-to-split assignment, serialized as one `split<TAB>source_id` line
/// per page.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SplitManifest {
    pub entries: Vec<(SplitName, String)>,
}

impl SplitManifest {
    pub fn from_split(split: &Split<String>) -> Self {
        let tagged = |name: SplitName, ids: &[String]| ids.iter().map(move |id| (name, id.clone())).collect::<Vec<_>>();
        let mut entries = tagged(SplitName::Train, &split.train);
        entries.extend(tagged(SplitName::Val, &split.val));
        entries.extend(tagged(SplitName::Test, &split.test));
        Self { entries }
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(s, id)| format!("{}\t{}\n", s.as_str(), id))
            .collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let bad = |reason: &str| Error::ManifestFormat {
                line: i + 1,
                reason: reason.to_string(),
            };
            let (split, id) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected `split<TAB>source_id`"))?;
            let split = SplitName::parse(split).ok_or_else(|| bad("split must be train, val or test"))?;
            entries.push((split, id.to_string()));
        }
        Ok(Self { entries })
    }

    pub fn ids(&self, which: SplitName) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(move |(s, _)| *s == which)
            .map(|(_, id)| id.as_str())
    }

    /// Partition `items` by manifest membership of their id, preserving
    /// manifest order. Ids missing from `items` are an error.
    pub fn apply<T: Clone>(&self, items: &[T], id_of: impl Fn(&T) -> &str) -> Result<Split<T>> {
        let by_id: HashMap<&str, &T> = items.iter().map(|t| (id_of(t), t)).collect();
        let mut split = Split {
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
        };
        for (name, id) in &self.entries {
            let item = by_id
                .get(id.as_str())
                .ok_or_else(|| Error::Parameter(format!("split manifest names `{id}`, which is not in the corpus")))?;
            match name {
                SplitName::Train => split.train.push((*item).clone()),
                SplitName::Val => split.val.push((*item).clone()),
                SplitName::Test => split.test.push((*item).clone()),
            }
        }
        Ok(split)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn page(id: &str, html: &str) -> LabeledPage {
        labeled_page_from_bytes(id, html.as_bytes(), GOLD_ATTR).unwrap()
    }

    fn word_page(words: &str) -> LabeledPage {
        page("w", &format!("<p>{words}</p>"))
    }

    #[test]
    fn ancestor_propagation() {
        let p = page(
            "a",
            r#"<body><article data-gold="content"><p>one</p><p>two <b>bold</b></p></article><footer>foot</footer></body>"#,
        );
        let labels: Vec<_> = p.labels().collect();
        assert_eq!(labels, [1, 1, 1, 0]);
    }

    #[test]
    fn unannotated_is_boilerplate() {
        let p = page("a", "<div><p>x</p><p>y</p></div>");
        assert!(p.labels().all(|l| l == 0));
        // Other attribute values do not count.
        let p = page("a", r#"<div data-gold="boilerplate"><p>x</p></div>"#);
        assert_eq!(p.labels().collect::<Vec<_>>(), [0]);
    }

    #[test]
    fn empty_page_is_an_error() {
        assert!(matches!(
            labeled_page_from_bytes("e", b"<p> </p>", GOLD_ATTR),
            Err(Error::EmptyPage(_))
        ));
    }

    #[test]
    fn vocabulary_ranking() {
        let v = build_vocabulary(&[word_page("a a a b b c")], 10, 2).unwrap();
        let words: Vec<_> = v.words().iter().map(|e| e.name.as_str()).collect();
        assert_eq!(words, ["a", "b"]);

        let v = build_vocabulary(&[word_page("y x y x")], 10, 1).unwrap();
        assert_eq!(v.words()[0].name, "x");
    }

    #[test]
    fn vocabulary_shrinks_and_rejects_zero() {
        let v = build_vocabulary(&[word_page("only")], 100, 100).unwrap();
        // html, body, p
        assert_eq!((v.k(), v.l(), v.d()), (3, 1, 6));
        assert!(matches!(
            build_vocabulary(&[word_page("x")], 0, 1),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            build_vocabulary(&[word_page("x")], 1, 0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(build_vocabulary(&[], 1, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn tag_frequency_counts_path_occurrences() {
        // div appears twice on one path: 2 occurrences; span once.
        let p = page("t", "<div><div><span>a</span></div></div>");
        let v = build_vocabulary(&[p], 10, 10).unwrap();
        let div = v.tags().iter().find(|e| e.name == "div").unwrap();
        assert_eq!(div.count, 2);
        // Rank k+1 falls out of the vocabulary and maps to the tag OOV slot.
        let v = build_vocabulary(&[page("t", "<div><div><span>a</span></div></div>")], 3, 10).unwrap();
        let names: BTreeSet<_> = v.tags().iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, BTreeSet::from(["body", "div", "html"]));
        assert_eq!(v.tag_slot("span"), v.k());
    }

    #[test]
    fn vocabulary_text_round_trip() {
        let v = build_vocabulary(&[word_page("the cat and the hat"), word_page("a cat")], 50, 1000).unwrap();
        let text = v.to_text();
        assert!(text.starts_with("k=3 l=5\n"));
        let back = Vocabulary::from_text(&text).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.to_text(), text);
        assert!(Vocabulary::from_text("k=1 l=0\n").is_err());
        assert!(Vocabulary::from_text("k=0 l=1\nword\ta\tx\n").is_err());
        assert!(Vocabulary::from_text("k=0 l=2\nword\ta\t1\nword\ta\t1\n").is_err());
    }

    #[test]
    fn class_weight_values() {
        assert_eq!(class_weights_from_counts(10, 10).unwrap(), (1.0, 1.0));
        let (w0, w1) = class_weights_from_counts(75, 25).unwrap();
        assert!((w0 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(w1, 2.0);
        assert!(matches!(
            class_weights_from_counts(0, 3),
            Err(Error::DegenerateCorpus(_))
        ));
    }

    #[test]
    fn paper_split_sizes() {
        for (n, spec) in [(736, (55, 5, 676)), (180, (50, 30, 100))] {
            let spec = SplitSpec {
                train_count: spec.0,
                val_count: spec.1,
                test_count: spec.2,
                seed: 7,
            };
            let s = split_dataset((0..n).collect::<Vec<_>>(), &spec).unwrap();
            assert_eq!(
                (s.train.len(), s.val.len(), s.test.len()),
                (spec.train_count, spec.val_count, spec.test_count)
            );
        }
        let spec = SplitSpec {
            train_count: 1,
            val_count: 1,
            test_count: 1,
            seed: 0,
        };
        assert!(matches!(
            split_dataset(vec![1, 2], &spec),
            Err(Error::SplitMismatch { .. })
        ));
    }

    #[test]
    fn manifest_round_trip_and_apply() {
        let ids: Vec<String> = (0..6).map(|i| format!("p{i}.html")).collect();
        let spec = SplitSpec {
            train_count: 3,
            val_count: 1,
            test_count: 2,
            seed: 99,
        };
        let split = split_dataset(ids.clone(), &spec).unwrap();
        let manifest = SplitManifest::from_split(&split);
        let parsed = SplitManifest::from_text(&manifest.to_text()).unwrap();
        assert_eq!(parsed, manifest);
        let applied = parsed.apply(&ids, |s| s.as_str()).unwrap();
        assert_eq!(applied, split);
        assert!(SplitManifest::from_text("bogus\tx\n").is_err());
    }
}

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use boilerseq::annotate::annotate_html;
use boilerseq::corpus::{
    build_vocabulary, class_weights, labeled_page_from_bytes, list_pages, split_dataset, LabeledPage, Split,
    SplitManifest, SplitName, SplitSpec, Vocabulary, GOLD_ATTR,
};
use boilerseq::dom::extract_blocks;
use boilerseq::encoder::{encode_blocks, encode_page, PageSequence};
use boilerseq::eval::{evaluate, predict_labels};
use boilerseq::model::{infer, load_params, save_params, ModelConfig, ModelParams};
use boilerseq::par::Exec;
use boilerseq::train::{train_with_observer, CheckpointMetric, TrainConfig};

use crate::manifest::RunManifest;
use crate::{AnnotateArgs, EvalArgs, Metric, PredictArgs, SplitArgs, Subset, SynthArgs, TrainArgs, VocabArgs};

const HISTORY_HEADER: &str = "epoch\tloss\tval_precision\tval_recall\tval_f1\n";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<boilerseq::Error> for CliError {
    fn from(e: boilerseq::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Attach the offending path to an error.
fn at<E: Into<boilerseq::Error>>(path: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| match CliError::from(e.into()) {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--threshold must be strictly between 0 and 1, got {t}"
        )))
    }
}

fn file_id(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// File names of the pages in `dir`, sorted. Nothing is opened.
fn corpus_ids(dir: &Path) -> Result<Vec<String>> {
    Ok(list_pages(dir).map_err(at(dir))?.iter().map(|f| file_id(f)).collect())
}

/// Load `ids` from `dir` in the given order, skipping pages without blocks.
fn load_pages(dir: &Path, ids: &[String], exec: Exec) -> Result<Vec<LabeledPage>> {
    let loaded = exec.map(ids, |id| -> Result<Option<LabeledPage>> {
        let f = dir.join(id);
        let bytes = fs::read(&f).map_err(io_at(&f))?;
        match labeled_page_from_bytes(id, &bytes, GOLD_ATTR) {
            Ok(p) => Ok(Some(p)),
            Err(boilerseq::Error::EmptyPage(_)) => {
                log::warn!("skipping {}: no text blocks", f.display());
                Ok(None)
            }
            Err(e) => Err(at(&f)(e)),
        }
    });
    let pages: Vec<_> = loaded
        .into_iter()
        .filter_map(Result::transpose)
        .collect::<Result<_>>()?;
    log::info!("loaded {} pages from {}", pages.len(), dir.display());
    Ok(pages)
}

/// Pages of `dir`; with `only`, files outside that set are never opened.
fn load_corpus(dir: &Path, only: Option<&HashSet<String>>, exec: Exec) -> Result<Vec<LabeledPage>> {
    let mut ids = corpus_ids(dir)?;
    if let Some(keep) = only {
        ids.retain(|id| keep.contains(id));
    }
    load_pages(dir, &ids, exec)
}

fn read_manifest(path: &Path) -> Result<SplitManifest> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    SplitManifest::from_text(&text).map_err(at(path))
}

fn load_vocab_and_model(vocab: &Path, model: &Path) -> Result<(Vocabulary, ModelParams)> {
    let v = Vocabulary::load(vocab).map_err(at(vocab))?;
    let p = load_params(model).map_err(at(model))?;
    if v.d() != p.d() {
        return Err(CliError::Data(format!(
            "vocabulary {} has d = {} but model {} expects d = {}",
            vocab.display(),
            v.d(),
            model.display(),
            p.d()
        )));
    }
    Ok((v, p))
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    if path == Path::new("-") {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf).map_err(io_at(path))?;
        Ok(buf)
    } else {
        fs::read(path).map_err(io_at(path))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(io_at(path))
}

fn encode_all(pages: &[LabeledPage], vocab: &Vocabulary) -> Result<Vec<PageSequence>> {
    Ok(pages
        .iter()
        .map(|p| encode_page(p, vocab))
        .collect::<boilerseq::Result<_>>()?)
}

pub fn vocab(args: &VocabArgs, exec: Exec) -> Result<()> {
    if args.k == 0 || args.l == 0 {
        return Err(CliError::Usage("--k and --l must be positive".into()));
    }
    let train_ids = match &args.split {
        Some(path) => Some(
            read_manifest(path)?
                .ids(SplitName::Train)
                .map(str::to_owned)
                .collect::<HashSet<_>>(),
        ),
        None => None,
    };
    let pages = load_corpus(&args.input, train_ids.as_ref(), exec)?;
    if pages.is_empty() {
        return Err(CliError::Data(format!("no usable pages in {}", args.input.display())));
    }
    let vocab = build_vocabulary(&pages, args.k, args.l)?;
    vocab.save(&args.out).map_err(at(&args.out))?;
    log::info!(
        "wrote {} (k = {}, l = {}, d = {})",
        args.out.display(),
        vocab.k(),
        vocab.l(),
        vocab.d()
    );
    Ok(())
}

/// `TRAIN,VAL,TEST` counts, or `None` when `s` is not of that form.
fn parse_counts(s: &str) -> Option<[usize; 3]> {
    let parts: Vec<_> = s.split(',').map(|p| p.trim().parse::<usize>()).collect();
    match parts.as_slice() {
        [Ok(a), Ok(b), Ok(c)] => Some([*a, *b, *c]),
        _ => None,
    }
}

fn seeded_split(ids: Vec<String>, counts: [usize; 3], seed: u64) -> Result<Split<String>> {
    let spec = SplitSpec {
        train_count: counts[0],
        val_count: counts[1],
        test_count: counts[2],
        seed,
    };
    Ok(split_dataset(ids, &spec)?)
}

/// Split the page files of `args.input` by manifest or by seeded counts.
fn split_ids(args: &TrainArgs, manifest: &mut RunManifest) -> Result<Split<String>> {
    let ids = corpus_ids(&args.input)?;
    if let Some(counts) = parse_counts(&args.split) {
        manifest.set("split_counts", counts.to_vec());
        return seeded_split(ids, counts, args.seed);
    }
    let path = PathBuf::from(&args.split);
    if !path.is_file() {
        return Err(CliError::Usage(format!(
            "--split `{}` is neither a manifest file nor TRAIN,VAL,TEST counts",
            args.split
        )));
    }
    manifest.input("split", &path);
    manifest.hash_file("split.input", &path).map_err(io_at(&path))?;
    Ok(read_manifest(&path)?.apply(&ids, |id| id.as_str())?)
}

pub fn split(args: &SplitArgs) -> Result<()> {
    let counts = parse_counts(&args.counts)
        .ok_or_else(|| CliError::Usage(format!("--counts `{}` is not TRAIN,VAL,TEST", args.counts)))?;
    let split = seeded_split(corpus_ids(&args.input)?, counts, args.seed)?;
    write_file(&args.out, SplitManifest::from_split(&split).to_text().as_bytes())?;
    log::info!("wrote {}", args.out.display());
    Ok(())
}

pub fn train(args: &TrainArgs, exec: Exec) -> Result<()> {
    check_threshold(args.threshold)?;
    if args.batch_size == 0 || [args.lr, args.clip_norm].iter().any(|v| v.is_nan() || *v <= 0.0) {
        return Err(CliError::Usage(
            "--batch-size, --lr and --clip-norm must be positive".into(),
        ));
    }
    let vocab = Vocabulary::load(&args.vocab).map_err(at(&args.vocab))?;
    let model_config = ModelConfig {
        d: vocab.d(),
        m: args.embed,
        h: args.hidden,
        layers: args.layers,
        dropout_p: args.dropout,
        seed: args.seed,
    };
    model_config.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let mut manifest = RunManifest::new("train");
    manifest.seed = Some(args.seed);
    manifest.input("corpus", &args.input);
    manifest.input("vocab", &args.vocab);
    manifest.hash_file("vocab", &args.vocab).map_err(io_at(&args.vocab))?;

    let split = split_ids(args, &mut manifest)?;
    log::info!(
        "split: {} train, {} val, {} test",
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    // test pages are never opened
    let train_pages = load_pages(&args.input, &split.train, exec)?;
    let val_pages = load_pages(&args.input, &split.val, exec)?;
    let weights = if args.unweighted {
        (1.0, 1.0)
    } else {
        class_weights(&train_pages)?
    };
    log::info!("class weights: boilerplate {:.4}, content {:.4}", weights.0, weights.1);

    let train_config = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.lr,
        weights,
        seed: args.seed,
        clip_norm: args.clip_norm,
        threshold: args.threshold,
        checkpoint: match args.checkpoint_metric {
            Metric::Content => CheckpointMetric::ContentF1,
            Metric::Boilerplate => CheckpointMetric::BoilerplateF1,
        },
        exec,
    };
    manifest.set("epochs", args.epochs);
    manifest.set("batch_size", args.batch_size);
    manifest.set("learning_rate", args.lr);
    manifest.set("hidden", args.hidden);
    manifest.set("layers", args.layers);
    manifest.set("embed", args.embed);
    manifest.set("dropout", args.dropout);
    manifest.set("clip_norm", args.clip_norm);
    manifest.set("threshold", args.threshold);
    manifest.set(
        "checkpoint_metric",
        format!("{:?}", args.checkpoint_metric).to_lowercase(),
    );
    manifest.set("class_weights", vec![weights.0, weights.1]);
    manifest.set("k", vocab.k());
    manifest.set("l", vocab.l());
    manifest.set("d", vocab.d());

    fs::create_dir_all(&args.out).map_err(io_at(&args.out))?;
    let split_path = args.out.join("split.tsv");
    write_file(&split_path, SplitManifest::from_split(&split).to_text().as_bytes())?;

    let train_seqs = encode_all(&train_pages, &vocab)?;
    let val_seqs = encode_all(&val_pages, &vocab)?;

    let mut epoch_files = Vec::new();
    let (best, history) = train_with_observer(
        &train_seqs,
        &val_seqs,
        &model_config,
        &train_config,
        |record, params| {
            if args.keep_epochs {
                let name = format!("epoch-{:03}.bseq", record.epoch);
                save_params(params, args.out.join(&name))?;
                epoch_files.push(name);
            }
            Ok(())
        },
    )?;

    let best_path = args.out.join("best.bseq");
    save_params(&best, &best_path).map_err(at(&best_path))?;
    let history_path = args.out.join("history.tsv");
    write_file(
        &history_path,
        format!("{HISTORY_HEADER}{}", history.to_tsv()).as_bytes(),
    )?;
    if let Some(epoch) = history.best_epoch {
        log::info!("best epoch {epoch} of {}", history.epochs.len());
    }
    manifest.set("best_epoch", history.best_epoch);

    for (name, path) in [
        ("split.tsv", &split_path),
        ("best.bseq", &best_path),
        ("history.tsv", &history_path),
    ] {
        manifest.hash_file(name, path).map_err(io_at(path))?;
    }
    for name in &epoch_files {
        let path = args.out.join(name);
        manifest.hash_file(name, &path).map_err(io_at(&path))?;
    }
    let manifest_path = args.out.join("manifest.json");
    manifest.write(&manifest_path).map_err(io_at(&manifest_path))?;
    Ok(())
}

pub fn eval(args: &EvalArgs, exec: Exec) -> Result<()> {
    check_threshold(args.threshold)?;
    let (vocab, params) = load_vocab_and_model(&args.vocab, &args.model)?;
    let mut manifest = RunManifest::new("eval");
    manifest.input("corpus", &args.input);
    manifest.input("vocab", &args.vocab);
    manifest.input("model", &args.model);
    manifest.hash_file("vocab", &args.vocab).map_err(io_at(&args.vocab))?;
    manifest.hash_file("model", &args.model).map_err(io_at(&args.model))?;
    manifest.set("threshold", args.threshold);

    let only = match (&args.split, args.subset) {
        (Some(path), Some(subset)) => {
            let which = match subset {
                Subset::Train => SplitName::Train,
                Subset::Val => SplitName::Val,
                Subset::Test => SplitName::Test,
            };
            manifest.input("split", path);
            manifest.set("subset", which.as_str());
            Some(
                read_manifest(path)?
                    .ids(which)
                    .map(str::to_owned)
                    .collect::<HashSet<_>>(),
            )
        }
        _ => None,
    };
    let pages = load_corpus(&args.input, only.as_ref(), exec)?;
    if pages.is_empty() {
        return Err(CliError::Data(format!(
            "no labeled pages to evaluate in {}",
            args.input.display()
        )));
    }
    let seqs = encode_all(&pages, &vocab)?;
    let report = evaluate(&seqs, &params, args.threshold, exec)?;
    manifest.set("pages", pages.len());

    let tsv = report.to_tsv();
    print!("{tsv}");
    fs::create_dir_all(&args.out).map_err(io_at(&args.out))?;
    let tsv_path = args.out.join("report.tsv");
    let json_path = args.out.join("report.json");
    write_file(&tsv_path, tsv.as_bytes())?;
    write_file(&json_path, format!("{}\n", report.to_json()).as_bytes())?;
    manifest.hash_file("report.tsv", &tsv_path).map_err(io_at(&tsv_path))?;
    manifest
        .hash_file("report.json", &json_path)
        .map_err(io_at(&json_path))?;
    let manifest_path = args.out.join("manifest.json");
    manifest.write(&manifest_path).map_err(io_at(&manifest_path))?;
    Ok(())
}

/// Content probabilities for every block of `html`; empty when the page has
/// no blocks.
fn score_page(html: &[u8], vocab: &Vocabulary, params: &ModelParams) -> Result<(Vec<String>, Vec<f64>)> {
    let blocks = extract_blocks(html)?;
    if blocks.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let seq = encode_blocks(&blocks, vocab)?;
    let probs = infer(&seq.matrix, params)?;
    Ok((blocks.into_iter().map(|b| b.text).collect(), probs))
}

fn preview(text: &str) -> String {
    text.chars()
        .take(40)
        .map(|c| if c.is_whitespace() { ' ' } else { c })
        .collect()
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    check_threshold(args.threshold)?;
    let (vocab, params) = load_vocab_and_model(&args.vocab, &args.model)?;
    let html = read_input(&args.html)?;
    let (texts, probs) = score_page(&html, &vocab, &params).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", args.html.display())),
        other => other,
    })?;
    let labels = predict_labels(&probs, args.threshold)?;
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    for (i, ((text, p), label)) in texts.iter().zip(&probs).zip(&labels).enumerate() {
        writeln!(out, "{i}\t{p:.6}\t{label}\t{}", preview(text)).map_err(io_at(Path::new("<stdout>")))?;
    }
    out.flush().map_err(io_at(Path::new("<stdout>")))
}

pub fn annotate(args: &AnnotateArgs) -> Result<()> {
    check_threshold(args.threshold)?;
    let (vocab, params) = load_vocab_and_model(&args.vocab, &args.model)?;
    let html = read_input(&args.html)?;
    let (_, probs) = score_page(&html, &vocab, &params)?;
    let labels = predict_labels(&probs, args.threshold)?;
    let out = annotate_html(&html, &labels).map_err(at(&args.html))?;
    write_file(&args.out, &out)?;
    log::info!(
        "marked {} of {} blocks as content in {}",
        labels.iter().filter(|&&l| l == 1).count(),
        labels.len(),
        args.out.display()
    );
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    fs::create_dir_all(&args.out).map_err(io_at(&args.out))?;
    for page in boilerseq::synthetic::corpus(args.pages, args.seed) {
        write_file(&args.out.join(&page.source_id), page.html.as_bytes())?;
    }
    log::info!("wrote {} pages to {}", args.pages, args.out.display());
    Ok(())
}

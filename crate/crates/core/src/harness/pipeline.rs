//! The four probe pipelines.
//!
//! Every pipeline plans its prompts up front, sends each distinct prompt to
//! the backend once (in parallel, through the cache), then folds the answers
//! into records in plan order. Parallelism therefore never changes outputs.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::rc::Rc;

use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Discards, EditDistanceRecord, HarnessError, Quarantined, RunConfig, RunOutput};
use crate::backends::{parse_numeric_answer, stable_hash, ArithAnswer, Backend, CompletionCache};
use crate::datasets::{
    load_arith, load_dialog_corpus, load_geo, load_text_corpus, make_dialog_prompt,
    make_text_prompt, sample_indices, DatasetError, GeoExample, InitialPrompt,
};
use crate::expr::{Expr, ExprGenConfig, ExprGenerator, ExprPath};
use crate::funql::extract_funql;
use crate::metrics::{
    arith_probe, first_line, geo_probe, numeric_correct, percent_edit_distance, ConsistencyRecord,
    TaskKind,
};
use crate::prompt::{
    assemble_kshot, build_choice_set, parse_choice_answer, render_arith_prompt,
    render_geoquery_prompt, render_hypothetical, ChoiceOutcome, ChoiceSet, HypTemplate,
};

pub(super) struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub cache: &'a CompletionCache,
    pub backends: &'a [Backend],
    pub subject: &'a Backend,
    pub chooser: &'a Backend,
}

type Answers = HashMap<String, Result<String, String>>;
type Shots = Vec<(String, String)>;

impl Context<'_> {
    /// Completes each distinct prompt once.
    fn query<'p>(
        &self,
        backend: &Backend,
        prompts: impl IntoIterator<Item = &'p String>,
    ) -> Answers {
        let unique: Vec<&String> = prompts
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        unique
            .par_iter()
            .map(|p| {
                let r = self
                    .cache
                    .get_or_complete(backend, p)
                    .map_err(|e| e.to_string());
                ((*p).clone(), r)
            })
            .collect()
    }

    fn rng(&self, parts: &[&str]) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(stable_hash(self.cfg.seed, parts))
    }

    /// `k` demonstrations drawn from `pool` for one item.
    fn pick_shots(&self, pool: &[(String, String)], k: usize, parts: &[&str]) -> Option<Shots> {
        if pool.len() < k {
            return None;
        }
        let idx = sample_indices(pool.len(), k, &mut self.rng(parts));
        Some(idx.into_iter().map(|i| pool[i].clone()).collect())
    }
}

fn answer<'a>(answers: &'a Answers, prompt: &str) -> Result<&'a str, String> {
    match answers.get(prompt) {
        Some(Ok(s)) => Ok(s),
        Some(Err(e)) => Err(e.clone()),
        None => Err("prompt was never sent".into()),
    }
}

fn quarantine(out: &mut RunOutput, probe: String, reason: String) {
    out.quarantined.push(Quarantined { probe, reason });
}

pub(super) fn execute(ctx: &Context<'_>) -> Result<RunOutput, HarnessError> {
    match ctx.cfg.task {
        TaskKind::CompArith => comp_arith(ctx),
        TaskKind::CompGeo => comp_geo(ctx),
        TaskKind::HypotheticalText | TaskKind::HypotheticalDialog => hypothetical(ctx),
    }
}

// ---------------------------------------------------------------- arithmetic

struct ArithProbe {
    item: usize,
    k: usize,
    path: ExprPath,
    sub_value: BigRational,
    shots: Rc<Shots>,
    root_prompt: String,
    sub_prompt: String,
}

fn comp_arith(ctx: &Context<'_>) -> Result<RunOutput, HarnessError> {
    let cfg = ctx.cfg;
    let mut out = RunOutput::default();
    let gen_cfg = cfg
        .generator
        .clone()
        .unwrap_or_else(|| ExprGenConfig::default().with_seed(cfg.seed));

    let items: Vec<(String, Expr)> = match &cfg.data {
        Some(path) => load_arith(path)?
            .into_iter()
            .take(cfg.sample_size())
            .collect(),
        None => {
            let mut generator = ExprGenerator::new(gen_cfg.clone());
            let items = generator
                .by_ref()
                .take(cfg.sample_size())
                .enumerate()
                .map(|(i, e)| (format!("arith-{i:04}"), e))
                .collect();
            out.discards.division_by_zero += generator.discarded() as u64;
            items
        }
    };

    // Demonstrations come from an independent stream and never repeat a query.
    let seen: HashSet<String> = items.iter().map(|(_, e)| e.render()).collect();
    let mut demo_gen = ExprGenerator::new(
        gen_cfg
            .clone()
            .with_seed(stable_hash(gen_cfg.seed(), &["demos"])),
    );
    let mut demos: Shots = Vec::new();
    let mut demo_seen = HashSet::new();
    for e in demo_gen.by_ref().take(cfg.demo_pool * 1000) {
        let text = e.render();
        if seen.contains(&text) || !demo_seen.insert(text.clone()) {
            continue;
        }
        let v = e.evaluate().expect("generator yields defined expressions");
        demos.push((render_arith_prompt(&text), ArithAnswer(v).to_string()));
        if demos.len() == cfg.demo_pool {
            break;
        }
    }
    out.discards.division_by_zero += demo_gen.discarded() as u64;
    if demos.len() < *cfg.k_values().end() {
        return Err(HarnessError::Data(format!(
            "only {} distinct demonstration expressions could be generated",
            demos.len()
        )));
    }

    let mut probes = Vec::new();
    let mut root_values = Vec::new();
    for (_, e) in &items {
        root_values.push(e.evaluate().expect("items are defined"));
    }
    for k in cfg.k_values() {
        for (i, (id, e)) in items.iter().enumerate() {
            let shots = Rc::new(
                ctx.pick_shots(&demos, k, &["arith-shots", id, &k.to_string()])
                    .expect("pool size checked"),
            );
            let root_prompt = assemble_kshot(&shots, &render_arith_prompt(&e.render()));
            for (path, sub) in e.subexpressions().into_iter().filter(|(p, _)| !p.is_root()) {
                probes.push(ArithProbe {
                    item: i,
                    k,
                    sub_value: sub
                        .evaluate()
                        .expect("sub-expressions of a defined expression are defined"),
                    path,
                    shots: shots.clone(),
                    root_prompt: root_prompt.clone(),
                    sub_prompt: assemble_kshot(&shots, &render_arith_prompt(&sub.render())),
                });
            }
        }
    }

    let first = ctx.query(
        ctx.subject,
        probes.iter().flat_map(|p| [&p.root_prompt, &p.sub_prompt]),
    );
    let spliced: Vec<Option<String>> = probes
        .iter()
        .map(|p| {
            let sub = answer(&first, &p.sub_prompt).ok()?;
            let text = items[p.item].1.splice(&p.path, first_line(sub)).ok()?;
            Some(assemble_kshot(&p.shots, &render_arith_prompt(&text)))
        })
        .collect();
    let second = ctx.query(ctx.subject, spliced.iter().flatten());

    for (p, spliced_prompt) in probes.iter().zip(&spliced) {
        let id = &items[p.item].0;
        let probe_id = format!("{id}/{}/k{}", p.path, p.k);
        let (root, sub) = match (
            answer(&first, &p.root_prompt),
            answer(&first, &p.sub_prompt),
        ) {
            (Ok(r), Ok(s)) => (r, s),
            (Err(e), _) | (_, Err(e)) => {
                quarantine(&mut out, probe_id, e);
                continue;
            }
        };
        let spliced_answer = match spliced_prompt {
            Some(sp) => match answer(&second, sp) {
                Ok(a) => Some(a),
                Err(e) => {
                    quarantine(&mut out, probe_id, e);
                    continue;
                }
            },
            None => None,
        };
        if parse_numeric_answer(first_line(sub)).is_none() {
            out.discards.unparseable += 1;
        }
        let (sub_correct, root_match) = arith_probe(&p.sub_value, sub, root, spliced_answer);
        let root_correct = numeric_correct(root, &root_values[p.item]);
        out.records.push(ConsistencyRecord::compositional(
            TaskKind::CompArith,
            id,
            &p.path.to_string(),
            &cfg.subject,
            p.k,
            sub_correct,
            root_match,
            Some(root_correct),
        ));
    }
    Ok(out)
}

// ------------------------------------------------------------------ GeoQuery

/// Splits a shuffled sample into (demos, queries): demonstrations first.
fn split_sample(
    len: usize,
    demos: usize,
    queries: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let order = sample_indices(len, (demos + queries).min(len), rng);
    let cut = demos.min(order.len());
    (order[..cut].to_vec(), order[cut..].to_vec())
}

fn comp_geo(ctx: &Context<'_>) -> Result<RunOutput, HarnessError> {
    let cfg = ctx.cfg;
    let mut out = RunOutput::default();
    let examples = load_geo(cfg.data.as_ref().expect("validated data path"))?;
    let (demo_idx, query_idx) = split_sample(
        examples.len(),
        cfg.demo_pool,
        cfg.sample_size(),
        &mut ctx.rng(&["geo-sample"]),
    );
    if demo_idx.len() < *cfg.k_values().end() || query_idx.is_empty() {
        return Err(HarnessError::Data(format!(
            "{} GeoQuery examples cannot supply {} demonstrations plus at least one query",
            examples.len(),
            cfg.k_values().end()
        )));
    }
    let demos: Shots = demo_idx
        .iter()
        .map(|&i| {
            (
                render_geoquery_prompt(&examples[i].question),
                examples[i].gold.render(),
            )
        })
        .collect();

    struct GeoProbe<'g> {
        ex: &'g GeoExample,
        span: usize,
        k: usize,
        root_prompt: String,
        sub_prompt: String,
    }
    let mut probes = Vec::new();
    for k in cfg.k_values() {
        for &i in &query_idx {
            let ex = &examples[i];
            let shots = ctx
                .pick_shots(&demos, k, &["geo-shots", &ex.id, &k.to_string()])
                .expect("pool size checked");
            let root_prompt = assemble_kshot(&shots, &render_geoquery_prompt(&ex.question));
            for (j, span) in ex.probes().iter().enumerate() {
                probes.push(GeoProbe {
                    ex,
                    span: j,
                    k,
                    root_prompt: root_prompt.clone(),
                    sub_prompt: assemble_kshot(&shots, &render_geoquery_prompt(&span.text)),
                });
            }
        }
    }
    let answers = ctx.query(
        ctx.subject,
        probes.iter().flat_map(|p| [&p.root_prompt, &p.sub_prompt]),
    );
    for p in &probes {
        let probe_id = format!("{}/s{}/k{}", p.ex.id, p.span + 1, p.k);
        let (root, sub) = match (
            answer(&answers, &p.root_prompt),
            answer(&answers, &p.sub_prompt),
        ) {
            (Ok(r), Ok(s)) => (r, s),
            (Err(e), _) | (_, Err(e)) => {
                quarantine(&mut out, probe_id, e);
                continue;
            }
        };
        if extract_funql(sub).is_err() {
            out.discards.unparseable += 1;
        }
        let (sub_correct, contained) = geo_probe(&p.ex.probes()[p.span].gold, sub, root);
        let root_correct = extract_funql(root).is_ok_and(|t| t == p.ex.gold);
        out.records.push(ConsistencyRecord::compositional(
            TaskKind::CompGeo,
            &p.ex.id,
            &format!("s{}", p.span + 1),
            &cfg.subject,
            p.k,
            sub_correct,
            contained,
            Some(root_correct),
        ));
    }
    Ok(out)
}

// -------------------------------------------------------------- hypothetical

struct HypItem {
    prompt: InitialPrompt,
    completions: BTreeMap<String, String>,
    /// Accepted choice sets by m.
    choice_sets: BTreeMap<usize, ChoiceSet>,
}

/// Walks the corpus in seeded order, keeping demos first and then queries,
/// skipping items too short to yield a prompt.
fn initial_prompts(
    ctx: &Context<'_>,
    discards: &mut Discards,
) -> Result<(Vec<InitialPrompt>, Vec<InitialPrompt>), HarnessError> {
    let cfg = ctx.cfg;
    let path = cfg.data.as_ref().expect("validated data path");
    let want_demos = cfg.demo_pool;
    let want = want_demos + cfg.sample_size();
    let mut kept = Vec::new();
    let mut handle = |r: Result<InitialPrompt, DatasetError>| -> Result<bool, HarnessError> {
        match r {
            Ok(p) => kept.push(p),
            Err(DatasetError::TooShort(_)) => discards.too_short += 1,
            Err(e) => return Err(e.into()),
        }
        Ok(kept.len() >= want)
    };
    let mut seen = HashSet::new();
    if cfg.task == TaskKind::HypotheticalText {
        let docs = load_text_corpus(path)?;
        for i in sample_indices(docs.len(), docs.len(), &mut ctx.rng(&["text-order"])) {
            let d = &docs[i];
            if !seen.insert(d.id.clone()) {
                return Err(HarnessError::Data(format!(
                    "duplicate document id {}",
                    d.id
                )));
            }
            if handle(make_text_prompt(d, &mut ctx.rng(&["text-prompt", &d.id])))? {
                break;
            }
        }
    } else {
        let dialogs = load_dialog_corpus(path)?;
        for i in sample_indices(
            dialogs.len(),
            dialogs.len(),
            &mut ctx.rng(&["dialog-order"]),
        ) {
            let d = &dialogs[i];
            if !seen.insert(d.id.clone()) {
                return Err(HarnessError::Data(format!("duplicate dialog id {}", d.id)));
            }
            if handle(make_dialog_prompt(&d.id, &d.turns))? {
                break;
            }
        }
    }
    let queries = kept.split_off(want_demos.min(kept.len()));
    if queries.is_empty() {
        return Err(HarnessError::Data(format!(
            "corpus yields {} usable prompts; need more than the {} demonstrations",
            kept.len(),
            want_demos
        )));
    }
    Ok((kept, queries))
}

fn hypothetical(ctx: &Context<'_>) -> Result<RunOutput, HarnessError> {
    let cfg = ctx.cfg;
    let mut out = RunOutput::default();
    let (demo_prompts, query_prompts) = initial_prompts(ctx, &mut out.discards)?;
    let n_demos = demo_prompts.len();
    let all: Vec<InitialPrompt> = demo_prompts.into_iter().chain(query_prompts).collect();

    // 0-shot completions from every backend.
    let per_backend: Vec<Answers> = ctx
        .backends
        .iter()
        .map(|b| ctx.query(b, all.iter().map(|p| &p.prompt)))
        .collect();
    let mut demos = Vec::new();
    let mut queries = Vec::new();
    for (idx, p) in all.into_iter().enumerate() {
        let mut completions = BTreeMap::new();
        let mut failure = None;
        for (b, answers) in ctx.backends.iter().zip(&per_backend) {
            match answer(answers, &p.prompt) {
                Ok(c) => {
                    completions.insert(b.name().to_string(), c.to_string());
                }
                Err(e) => {
                    failure = Some(format!("{}: {e}", b.name()));
                    break;
                }
            }
        }
        if let Some(reason) = failure {
            quarantine(&mut out, format!("{}/initial", p.id), reason);
            continue;
        }
        let item = HypItem {
            prompt: p,
            completions,
            choice_sets: BTreeMap::new(),
        };
        if idx < n_demos {
            demos.push(item);
        } else {
            queries.push(item);
        }
    }

    // Edit distances between models' completions of the same prompt.
    for item in &queries {
        let named: Vec<(&String, &String)> = ctx
            .backends
            .iter()
            .filter_map(|b| item.completions.get_key_value(b.name()))
            .collect();
        for (i, (a, ca)) in named.iter().enumerate() {
            for (b, cb) in &named[i + 1..] {
                if let Ok(percent) = percent_edit_distance(ca, cb) {
                    out.edit_distances.push(EditDistanceRecord {
                        task: cfg.task,
                        item: item.prompt.id.clone(),
                        model_a: (*a).clone(),
                        model_b: (*b).clone(),
                        percent,
                    });
                }
            }
        }
    }

    // Choice sets per item and m.
    for (is_query, items) in [(false, &mut demos), (true, &mut queries)] {
        for item in items.iter_mut() {
            let cont = item
                .prompt
                .continuation
                .as_deref()
                .expect("text and dialog prompts carry a continuation");
            for m in cfg.m_values() {
                let mut rng = ctx.rng(&["choices", &item.prompt.id, &m.to_string()]);
                match build_choice_set(cont, &item.completions, &cfg.subject, m, &mut rng) {
                    Ok(ChoiceOutcome::Accepted(cs)) => {
                        item.choice_sets.insert(m, cs);
                    }
                    Ok(ChoiceOutcome::Rejected(_)) => {
                        if is_query {
                            out.discards.distinctness_rejections += 1;
                        }
                    }
                    Err(e) => return Err(HarnessError::Data(format!("{}: {e}", item.prompt.id))),
                }
            }
        }
    }

    struct HypProbe<'a> {
        item: &'a HypItem,
        m: usize,
        template: HypTemplate,
        k: usize,
        prompt: String,
    }
    let templates = cfg.hyp_templates();
    let mut probes = Vec::new();
    for item in &queries {
        for (&m, cs) in &item.choice_sets {
            let pool: Vec<&HypItem> = demos
                .iter()
                .filter(|d| d.choice_sets.contains_key(&m))
                .collect();
            for k in cfg.k_values() {
                if pool.len() < k {
                    out.discards.insufficient_demos += templates.len() as u64;
                    continue;
                }
                let picked = sample_indices(
                    pool.len(),
                    k,
                    &mut ctx.rng(&["hyp-shots", &item.prompt.id, &m.to_string(), &k.to_string()]),
                );
                for &template in &templates {
                    let shots: Shots = picked
                        .iter()
                        .map(|&i| {
                            let d = pool[i];
                            let dcs = &d.choice_sets[&m];
                            (
                                render_hypothetical(template, &d.prompt.prompt, dcs),
                                dcs.own_label().to_string(),
                            )
                        })
                        .collect();
                    let query = render_hypothetical(template, &item.prompt.prompt, cs);
                    probes.push(HypProbe {
                        item,
                        m,
                        template,
                        k,
                        prompt: assemble_kshot(&shots, &query),
                    });
                }
            }
        }
    }

    let answers = ctx.query(ctx.chooser, probes.iter().map(|p| &p.prompt));
    for p in &probes {
        let id = &p.item.prompt.id;
        let completion = match answer(&answers, &p.prompt) {
            Ok(c) => c,
            Err(e) => {
                quarantine(
                    &mut out,
                    format!("{id}/m{}/t{}/k{}", p.m, p.template.id(), p.k),
                    e,
                );
                continue;
            }
        };
        let cs = &p.item.choice_sets[&p.m];
        let chosen = parse_choice_answer(completion, Some(cs));
        if chosen.is_none() {
            out.discards.unparseable += 1;
        }
        out.records.push(ConsistencyRecord::hypothetical(
            cfg.task,
            id,
            &cfg.subject,
            p.k,
            p.m,
            p.template.id(),
            chosen,
            cs.own_label(),
            chosen.map(|l| cs.get(l).provenance.to_string()),
        ));
    }
    Ok(out)
}

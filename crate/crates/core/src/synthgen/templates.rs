use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::draft::Draft;
use super::{GenConfig, Lexicon, Profile};

const REFER: &str = "Refer_to";

/// Surface language of a document. French documents swap the connective
/// words for accented ones; annotated mentions come from the shared tables.
#[derive(Clone, Copy, PartialEq, Eq)]
pub(super) enum Lang {
    En,
    Fr,
}

impl Lang {
    fn pick(self, en: &'static str, fr: &'static str) -> &'static str {
        match self {
            Lang::En => en,
            Lang::Fr => fr,
        }
    }
}

const FILLER_EN: &[&str] = &[
    "The patient was seen in clinic today.",
    "Blood pressure remained stable.",
    "Renal function is within normal limits.",
    "She reports mild fatigue over the past days.",
    "Physical examination is unremarkable.",
    "Laboratory results were reviewed with the team.",
    "He lives at home with his family.",
    "Follow-up visit planned in three months.",
    "The chest radiograph shows no acute change.",
    "Weight is stable compared with the last visit.",
    "Inflammatory markers are decreasing.",
    "The case was discussed at the multidisciplinary meeting.",
];

const FILLER_FR: &[&str] = &[
    "Le patient a été vu en consultation ce jour.",
    "La tension artérielle reste stable.",
    "La fonction rénale est préservée.",
    "Elle décrit une fatigue modérée depuis quelques jours.",
    "L'examen clinique est sans particularité.",
    "Les résultats biologiques ont été revus avec l'équipe.",
    "Il vit à domicile avec sa famille.",
    "Prochaine consultation prévue dans trois mois.",
    "La radiographie thoracique ne montre pas de changement aigu.",
    "Le poids est stable par rapport à la dernière visite.",
    "Les marqueurs inflammatoires sont en baisse.",
    "Dossier discuté en réunion de concertation pluridisciplinaire.",
];

pub(super) fn filler(d: &mut Draft, rng: &mut ChaCha8Rng, lang: Lang) {
    let table = match lang {
        Lang::En => FILLER_EN,
        Lang::Fr => FILLER_FR,
    };
    d.word(table.choose(rng).expect("filler table is non-empty"));
}

fn pick<'a>(rng: &mut ChaCha8Rng, table: &'a [String]) -> &'a str {
    table.choose(rng).expect("lexicon tables are checked non-empty")
}

/// Writes one sentence holding at least one drug mention.
pub(super) fn drug_sentence(d: &mut Draft, rng: &mut ChaCha8Rng, cfg: &GenConfig, profile: Profile, lang: Lang) {
    match profile {
        Profile::CorpHus => hus_sentence(d, rng, cfg, lang),
        Profile::N2c2 => n2c2_sentence(d, rng, cfg, lang),
    }
    d.word(".");
}

#[derive(Clone, Copy, Debug)]
enum Hus {
    Start,
    RelativeStart,
    Stop,
    Ongoing,
    Duration,
    AdministrationTime,
    Increase,
    Decrease,
    Negation,
    Contraindicated,
    Hypothetical,
    Experiencer,
    Coref,
    Discontinue,
    TwoDrugs,
    SharedStart,
}

/// Relative weights of the contextual template families, following the
/// relative frequency of each relation type in a hospital prescription
/// corpus.
const HUS_WEIGHTS: &[(Hus, f64)] = &[
    (Hus::Start, 9.0),
    (Hus::RelativeStart, 3.0),
    (Hus::Stop, 7.0),
    (Hus::Ongoing, 10.0),
    (Hus::Duration, 2.0),
    (Hus::AdministrationTime, 0.5),
    (Hus::Increase, 1.0),
    (Hus::Decrease, 0.8),
    (Hus::Negation, 1.3),
    (Hus::Contraindicated, 1.1),
    (Hus::Hypothetical, 1.1),
    (Hus::Experiencer, 0.1),
    (Hus::Coref, 3.5),
    (Hus::Discontinue, 0.8),
    (Hus::TwoDrugs, 3.0),
    (Hus::SharedStart, 2.0),
];

/// Optional `Dosage`, `Route`, `Frequency` run after a drug, each kept with
/// probability one half, at least one if `at_least_one`.
fn regimen_attrs(d: &mut Draft, rng: &mut ChaCha8Rng, lex: &Lexicon, at_least_one: bool) -> Vec<String> {
    let mut keep: [bool; 3] = [rng.random_bool(0.5), rng.random_bool(0.5), rng.random_bool(0.5)];
    if at_least_one && !keep.iter().any(|&k| k) {
        keep[rng.random_range(0..3)] = true;
    }
    let mut out = Vec::new();
    if keep[0] {
        out.push(d.ent("Dosage", pick(rng, &lex.dosages)));
    }
    if keep[1] {
        out.push(d.ent("Route", pick(rng, &lex.routes)));
    }
    if keep[2] {
        out.push(d.ent("Frequency", pick(rng, &lex.frequencies)));
    }
    out
}

fn refer(ids: &[String]) -> Vec<(&str, &str)> {
    ids.iter().map(|a| (a.as_str(), REFER)).collect()
}

fn with_link<'a>(ids: &'a [String], extra: &'a str, rtype: &'a str) -> Vec<(&'a str, &'a str)> {
    let mut links = refer(ids);
    links.push((extra, rtype));
    links
}

fn hus_sentence(d: &mut Draft, rng: &mut ChaCha8Rng, cfg: &GenConfig, lang: Lang) {
    let lex = &cfg.lexicon;
    if rng.random_bool(cfg.multi_frame_rate) {
        return two_period(d, rng, lex, lang);
    }
    if !rng.random_bool(cfg.context_relation_rate) {
        return plain(d, rng, lex, lang);
    }
    let weights = WeightedIndex::new(HUS_WEIGHTS.iter().map(|(_, w)| *w)).expect("weights are positive");
    let family = HUS_WEIGHTS[weights.sample(rng)].0;
    let l = lang;
    match family {
        Hus::Start | Hus::Stop | Hus::Ongoing => {
            let drug = d.ent("Drug", pick(rng, &lex.drugs));
            let attrs = regimen_attrs(d, rng, lex, false);
            let (words, rtype) = match family {
                Hus::Start => (l.pick("started on", "débuté le"), "Start"),
                Hus::Stop => (l.pick("stopped on", "arrêté le"), "Stop"),
                _ => (l.pick("ongoing since", "en cours depuis le"), "Ongoing"),
            };
            d.word(words);
            let date = d.ent("Date", pick(rng, &lex.dates));
            d.frame(&drug, &with_link(&attrs, &date, rtype));
        }
        Hus::RelativeStart => {
            let drug = d.ent("Drug", pick(rng, &lex.drugs));
            let attrs = regimen_attrs(d, rng, lex, false);
            d.word(l.pick("started", "débuté"));
            let rel = d.ent("Relative_Date", pick(rng, &lex.relative_dates));
            d.frame(&drug, &with_link(&attrs, &rel, "Start"));
        }
        Hus::Duration => {
            let drug = d.ent("Drug", pick(rng, &lex.drugs));
            let attrs = regimen_attrs(d, rng, lex, false);
            d.word(l.pick("for", "pendant"));
            let dur = d.ent("Duration", pick(rng, &lex.durations));
            d.frame(&drug, &with_link(&attrs, &dur, "Duration_prescription"));
        }
        Hus::AdministrationTime => {
            let drug = d.ent("Drug", pick(rng, &lex.drugs));
            let dose = d.ent("Dosage", pick(rng, &lex.dosages));
            d.word(l.pick("infused over", "perfusé en"));
            let dur = d.ent("Duration", pick(rng, &lex.durations));
            d.frame(&drug, &[(&dose, REFER), (&dur, "Administration_time")]);
        }
        Hus::Increase | Hus::Decrease => {
            let drug = d.ent("Drug", pick(rng, &lex.drugs));
            let (words, rtype) = if matches!(family, Hus::Increase) {
                (l.pick("increased to", "augmenté à"), "Increase")
            } else {
                (l.pick("reduced to", "diminué à"), "Decrease")
            };
            d.word(words);
            let dose = d.ent("Dosage", pick(rng, &lex.dosages));
            let mut links = vec![(dose.as_str(), rtype)];
            let freq = rng.random_bool(0.5).then(|| d.ent("Frequency", pick(rng, &lex.frequencies)));
            if let Some(f) = &freq {
                links.push((f.as_str(), REFER));
            }
            d.frame(&drug, &links);
        }
        Hus::Negation => {
            let ctx = d.ent("Context", l.pick("no", "pas de"));
            let drug = d.ent("Drug", pick(rng, &lex.drugs));
            d.word(l.pick("was given", "administré"));
            d.frame(&drug, &[(&ctx, "Negation")]);
        }
        Hus::Contraindicated => {
            let drug = d.ent("Drug", pick(rng, &lex.drugs));
            d.word(l.pick("is", "est"));
            let ctx = d.ent("Context", l.pick("contraindicated", "contre-indiqué"));
            d.frame(&drug, &[(&ctx, "Contraindicated")]);
        }
        Hus::Hypothetical => {
            let drug = d.ent("Drug", pick(rng, &lex.drugs));
            let dose = d.ent("Dosage", pick(rng, &lex.dosages));
            let ctx = d.ent("Context", l.pick("if needed", "si besoin"));
            d.word(l.pick("for", "pour"));
            let cond = d.ent("Condition", pick(rng, &lex.conditions));
            d.frame(&drug, &[(&dose, REFER), (&ctx, "Hypothetical"), (&cond, REFER)]);
        }
        Hus::Experiencer => {
            let ctx = d.ent("Context", l.pick("mother", "mère"));
            d.word(l.pick("treated with", "traitée par"));
            let drug = d.ent("Drug", pick(rng, &lex.drugs));
            d.frame(&drug, &[(&ctx, "Experiencer")]);
        }
        Hus::Coref => {
            let class = d.ent("Class_of_Drug", pick(rng, &lex.drug_classes));
            d.word(l.pick("introduced:", "introduit :"));
            let drug = d.ent("Drug", pick(rng, &lex.drugs));
            let attrs = regimen_attrs(d, rng, lex, true);
            d.frame(&drug, &refer(&attrs));
            d.doc_relation("Coref", &class, &drug);
        }
        Hus::Discontinue => {
            let old = d.ent("Drug", pick(rng, &lex.drugs));
            d.word(l.pick("replaced by", "remplacé par"));
            let new = d.ent("Drug", pick(rng, &lex.drugs));
            let attrs = regimen_attrs(d, rng, lex, true);
            d.frame(&new, &refer(&attrs));
            d.doc_relation("Discontinue", &old, &new);
        }
        Hus::TwoDrugs => {
            let a = d.ent("Drug", pick(rng, &lex.drugs));
            let da = d.ent("Dosage", pick(rng, &lex.dosages));
            d.word(l.pick("and", "et"));
            let b = d.ent("Drug", pick(rng, &lex.drugs));
            let db = d.ent("Dosage", pick(rng, &lex.dosages));
            let freq = d.ent("Frequency", pick(rng, &lex.frequencies));
            d.frame(&a, &[(&da, REFER), (&freq, REFER)]);
            d.frame(&b, &[(&db, REFER), (&freq, REFER)]);
        }
        Hus::SharedStart => {
            let a = d.ent("Drug", pick(rng, &lex.drugs));
            d.word(l.pick("and", "et"));
            let b = d.ent("Drug", pick(rng, &lex.drugs));
            d.word(l.pick("started on", "débutés le"));
            let date = d.ent("Date", pick(rng, &lex.dates));
            d.frame(&a, &[(&date, "Start")]);
            d.frame(&b, &[(&date, "Start")]);
        }
    }
}

fn plain(d: &mut Draft, rng: &mut ChaCha8Rng, lex: &Lexicon, lang: Lang) {
    const LEAD_EN: &[&str] = &["Patient takes", "Continue", "Prescribed:", "Current treatment:", ""];
    const LEAD_FR: &[&str] = &["Patient sous", "Poursuivre", "Prescription :", "Traitement habituel :", ""];
    let lead = match lang {
        Lang::En => LEAD_EN,
        Lang::Fr => LEAD_FR,
    };
    d.word(lead.choose(rng).expect("non-empty"));
    let drug = d.ent("Drug", pick(rng, &lex.drugs));
    let mut attrs = regimen_attrs(d, rng, lex, true);
    if rng.random_bool(0.15) {
        d.word(lang.pick("for", "pour"));
        attrs.push(d.ent("Condition", pick(rng, &lex.conditions)));
    }
    d.frame(&drug, &refer(&attrs));
}

/// "treatment with X route f1 from d1 to d2, then f2 until d3": one drug,
/// two frames sharing the route and the switch date.
fn two_period(d: &mut Draft, rng: &mut ChaCha8Rng, lex: &Lexicon, lang: Lang) {
    d.word(lang.pick("Treatment with", "Traitement par"));
    let drug = d.ent("Drug", pick(rng, &lex.drugs));
    let route = d.ent("Route", pick(rng, &lex.routes));
    let f1 = d.ent("Frequency", pick(rng, &lex.frequencies));
    d.word(lang.pick("from", "du"));
    let d1 = d.ent("Date", pick(rng, &lex.dates));
    d.word(lang.pick("to", "au"));
    let d2 = d.ent("Date", pick(rng, &lex.dates));
    d.word(lang.pick(", then", ", puis"));
    let f2 = d.ent("Frequency", pick(rng, &lex.frequencies));
    d.word(lang.pick("until", "jusqu'au"));
    let d3 = d.ent("Date", pick(rng, &lex.dates));
    d.frame(&drug, &[(&route, REFER), (&f1, REFER), (&d1, "Start"), (&d2, REFER)]);
    d.frame(&drug, &[(&route, REFER), (&f2, REFER), (&d2, REFER), (&d3, "Stop")]);
}

/// Attribute inclusion rates of the English profile, in proportion to each
/// attribute type's share of annotated relations.
const N2C2_RATES: &[(&str, f64)] = &[
    ("Strength", 0.8),
    ("Form", 0.8),
    ("Dosage", 0.5),
    ("Frequency", 0.75),
    ("Route", 0.65),
    ("Duration", 0.08),
    ("Reason", 0.6),
    ("ADE", 0.13),
];

fn n2c2_table<'a>(lex: &'a Lexicon, etype: &str) -> &'a [String] {
    match etype {
        "Strength" => &lex.strengths,
        "Form" => &lex.forms,
        "Dosage" => &lex.doses,
        "Frequency" => &lex.frequencies,
        "Route" => &lex.routes,
        "Duration" => &lex.durations,
        "Reason" => &lex.reasons,
        _ => &lex.adverse_events,
    }
}

fn n2c2_attr(d: &mut Draft, rng: &mut ChaCha8Rng, lex: &Lexicon, etype: &str) -> String {
    match etype {
        "Duration" => d.word("for"),
        "Reason" => d.word("for"),
        "ADE" => d.word(", complicated by"),
        _ => {}
    }
    d.ent(etype, pick(rng, n2c2_table(lex, etype)))
}

fn n2c2_sentence(d: &mut Draft, rng: &mut ChaCha8Rng, cfg: &GenConfig, _lang: Lang) {
    let lex = &cfg.lexicon;
    if rng.random_bool(cfg.multi_frame_rate) {
        // Taper: one drug, two strength/frequency periods sharing the route.
        d.word("Start");
        let drug = d.ent("Drug", pick(rng, &lex.drugs));
        let route = d.ent("Route", pick(rng, &lex.routes));
        let s1 = d.ent("Strength", pick(rng, &lex.strengths));
        let f1 = d.ent("Frequency", pick(rng, &lex.frequencies));
        let dur = n2c2_attr(d, rng, lex, "Duration");
        d.word(", then");
        let s2 = d.ent("Strength", pick(rng, &lex.strengths));
        let f2 = d.ent("Frequency", pick(rng, &lex.frequencies));
        d.frame(
            &drug,
            &[(&route, "Route-Drug"), (&s1, "Strength-Drug"), (&f1, "Frequency-Drug"), (&dur, "Duration-Drug")],
        );
        d.frame(&drug, &[(&route, "Route-Drug"), (&s2, "Strength-Drug"), (&f2, "Frequency-Drug")]);
        return;
    }
    const LEAD: &[&str] = &["Discharge medications include", "Continue", "Started on", "Home meds:", ""];
    d.word(LEAD.choose(rng).expect("non-empty"));
    let drug = d.ent("Drug", pick(rng, &lex.drugs));
    let mut attrs: Vec<(String, String)> = Vec::new();
    for &(etype, rate) in N2C2_RATES {
        let p = if matches!(etype, "Duration" | "Reason" | "ADE") {
            (rate * 2.0 * cfg.context_relation_rate).min(1.0)
        } else {
            rate
        };
        if rng.random_bool(p) {
            let id = n2c2_attr(d, rng, lex, etype);
            attrs.push((id, format!("{etype}-Drug")));
        }
    }
    let links: Vec<(&str, &str)> = attrs.iter().map(|(a, r)| (a.as_str(), r.as_str())).collect();
    d.frame(&drug, &links);
}

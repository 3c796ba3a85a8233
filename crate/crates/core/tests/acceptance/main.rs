mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration as StdDuration, Instant};

use baitmail_core::archive::{
    compute_all_metrics, compute_metrics, conversation_validity, cross_instance_report, export_transcript,
    parse_time, parse_transcript, read_archive_dir, Archive, ArchivedConversation, CrossInstanceOptions, Direction,
    MetricsOptions, TranscriptMessage, CRAWLER,
};
use baitmail_core::corpus::{
    coarsen_labels, corpus_stats, enron_pairs, extract_bait_pairs, parse_mail, parse_pairs, read_maildir,
    thread_conversations, write_pairs, FineLabel, LabelMap, RoleTagged,
};
use baitmail_core::gateway::html::{canonical_text, strip_tags};
use baitmail_core::gateway::{InboundEmail, MailProvider, ProviderError, ProviderResponse, SendRequest};
use baitmail_core::ingestion::{ReviewDecision, ScamReport};
use baitmail_core::orchestrator::{
    assign_responder, mailname_pattern, MessageDirection, Orchestrator, OrchestratorConfig, RegisteredResponder,
    ResponderDescriptor,
};
use baitmail_core::responders::{
    bundled_corpus, train_baseline_classifier, BridgeError, ClassifierTemplateResponder, GeneratorRequest,
    GeneratorResponder, GeneratorResponse, GeneratorSettings, LabelledText, ResponderKind, Role, ScamCategory,
    TextGenerator,
};
use baitmail_core::sim::{
    run_experiment, write_run, AgentKind, BounceMode, MixEntry, PopulationGroup, SimConfig,
};
use baitmail_core::EmailAddress;
use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn t(y: i32, mo: u32, d: u32, h: u32, mi: u32, s: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(y, mo, d, h, mi, s).unwrap()
}

// ---------------------------------------------------------------- 1

fn policy_suite() -> Outcome {
    let cfg = SimConfig {
        n_targets: 1500,
        master_seed: 20220712,
        duration_days: 21,
        mix: vec![
            MixEntry { weight: 0.55, agent: AgentKind::Silent },
            MixEntry { weight: 0.10, agent: AgentKind::autoresponder() },
            MixEntry { weight: 0.35, agent: AgentKind::persistent(0.8, 0.1) },
        ],
        bounce_rate: 0.1,
        late_bounce_rate: 0.05,
        transient_rate: 0.05,
        reject_rate: 0.05,
        operator_stop_rate: 0.05,
        stray_rate: 0.05,
        ..SimConfig::default()
    };
    let started = Instant::now();
    let run = run_experiment(&cfg).map_err(|e| format!("run aborted: {e}"))?;
    let elapsed = started.elapsed();
    let events = run.total_events();
    ensure(events >= 10_000, || format!("only {events} events"))?;
    ensure(elapsed < StdDuration::from_secs(60), || format!("took {elapsed:?}"))?;

    let rejected: BTreeSet<String> = baitmail_core::sim::plan_population(&cfg)
        .into_iter()
        .filter(|p| p.rejected)
        .map(|p| p.address)
        .collect();
    let archive = &run.instances[0].archive;
    let mut seen = BTreeSet::new();
    let mut stops = 0;
    for c in &archive.conversations {
        let out = c.count(Direction::Outbound);
        let inb = c.count(Direction::Inbound);
        ensure(out <= inb + 1, || format!("{}: {out} outbound vs {inb} inbound", c.id))?;
        ensure(seen.insert(c.target.clone()), || format!("two conversations with {}", c.target))?;
        ensure(!rejected.contains(&c.target), || format!("rejected {} was contacted", c.target))?;
        if c.stop_reason.as_deref() == Some("operator_stop") {
            stops += 1;
        }
    }
    ensure(stops > 0, || "no operator stops exercised".into())?;
    ensure(run.instances[0].quarantined > 0, || "no quarantine exercised".into())?;
    let unreachable = archive.conversations.iter().filter(|c| c.unreachable_at_first_send).count();
    ensure(unreachable > 0, || "no bounces exercised".into())?;
    Ok(format!(
        "{events} events, {} conversations, {stops} operator stops, {unreachable} bounced, {} quarantined, 0 violations, {:.1}s",
        archive.conversations.len(),
        run.instances[0].quarantined,
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 2

fn random_archive(rng: &mut ChaCha8Rng) -> Archive {
    let strategies = ["classifier-template", "generator-a", "generator-b"];
    let pool = ["Send the fee.", "send   THE fee.", "Where are you?", "I am out of office.", "ok", "Reply now"];
    let base = t(2022, 7, 12, 0, 0, 0);
    let n = rng.random_range(0..25);
    let conversations = (0..n)
        .map(|i| {
            let target = format!("s{i}@x.test");
            let mut time = base + Duration::seconds(rng.random_range(0..86_400 * 5));
            let mut messages = vec![TranscriptMessage {
                direction: Direction::Solicitation,
                from: target.clone(),
                to: CRAWLER.into(),
                time,
                subject: "offer".into(),
                body: "solicitation".into(),
            }];
            for _ in 0..rng.random_range(0..9) {
                time += Duration::seconds(rng.random_range(0..86_400 * 4));
                let inbound = rng.random_bool(0.55);
                let body = if rng.random_bool(0.6) {
                    (*pool.choose(rng).unwrap()).to_string()
                } else {
                    format!("note {}", rng.random_range(0..1000))
                };
                messages.push(TranscriptMessage {
                    direction: if inbound { Direction::Inbound } else { Direction::Outbound },
                    from: if inbound { target.clone() } else { "ab12345@m.test".into() },
                    to: if inbound { "ab12345@m.test".into() } else { target.clone() },
                    time,
                    subject: "Re: offer".into(),
                    body,
                });
            }
            ArchivedConversation {
                id: format!("c{i}"),
                strategy: (*strategies.choose(rng).unwrap()).to_string(),
                target,
                messages,
                stop_reason: None,
                unreachable_at_first_send: false,
            }
        })
        .collect();
    Archive::new(conversations)
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut compared = 0;
    for case in 0..100 {
        let archive = random_archive(&mut rng);
        let opts = MetricsOptions {
            window_end: rng.random_bool(0.5).then(|| t(2022, 7, 12, 0, 0, 0) + Duration::days(rng.random_range(1..30))),
            include_invalid_replies: rng.random_bool(0.3),
            rate_decimals: rng.random_range(0..4),
        };
        let rows = oracle::rows(&archive);
        let want = oracle::brute_force(&rows, None, opts.window_end, opts.include_invalid_replies, opts.rate_decimals);
        let got = compute_metrics(&archive, None, &opts);
        ensure(got == want, || format!("case {case} overall: {got:?} != {want:?}"))?;
        let per = compute_all_metrics(&archive, &opts);
        let strategies: BTreeSet<&str> = archive.conversations.iter().map(|c| c.strategy.as_str()).collect();
        ensure(per.keys().map(String::as_str).collect::<BTreeSet<_>>() == strategies, || {
            format!("case {case}: strategy keys differ")
        })?;
        for s in strategies {
            let want = oracle::brute_force(&rows, Some(s), opts.window_end, opts.include_invalid_replies, opts.rate_decimals);
            ensure(per[s] == want, || format!("case {case} {s}: {:?} != {want:?}", per[s]))?;
            compared += 1;
        }
        compared += 1;
    }
    Ok(format!("100 random archives, {compared} reports identical"))
}

// ---------------------------------------------------------------- 3

fn strategy_fixture(strategy: &str, conversations: usize, replies: usize, offset: usize) -> Vec<ArchivedConversation> {
    let base = t(2022, 7, 12, 17, 0, 0);
    (0..conversations)
        .map(|i| {
            let n = replies / conversations + usize::from(i < replies % conversations);
            let target = format!("{strategy}-{i}@x.test");
            let mut messages = vec![TranscriptMessage {
                direction: Direction::Solicitation,
                from: target.clone(),
                to: CRAWLER.into(),
                time: base,
                subject: "s".into(),
                body: "offer".into(),
            }];
            for k in 0..n {
                messages.push(TranscriptMessage {
                    direction: Direction::Inbound,
                    from: target.clone(),
                    to: "ab12345@m.test".into(),
                    time: base + Duration::hours((k + 1) as i64),
                    subject: "Re: s".into(),
                    body: format!("reply {k}"),
                });
            }
            ArchivedConversation {
                id: format!("c{}", offset + i),
                strategy: strategy.into(),
                target,
                messages,
                stop_reason: None,
                unreachable_at_first_send: false,
            }
        })
        .collect()
}

fn cross_fixture_side(
    engaged: &BTreeSet<usize>,
    interested: &BTreeSet<usize>,
    end: DateTime<Utc>,
) -> Archive {
    let conversations = (0..510)
        .map(|i| {
            let target = format!("u{i:03}@x.test");
            let start = end - Duration::days(11);
            let mut messages = vec![TranscriptMessage {
                direction: Direction::Solicitation,
                from: target.clone(),
                to: CRAWLER.into(),
                time: start,
                subject: "s".into(),
                body: "offer".into(),
            }];
            let bounced = i >= 374;
            let out = |time| TranscriptMessage {
                direction: Direction::Outbound,
                from: "ab12345@m.test".into(),
                to: target.clone(),
                time,
                subject: "Re: s".into(),
                body: "hello".into(),
            };
            messages.push(out(start + Duration::hours(1)));
            if engaged.contains(&i) {
                let at = if interested.contains(&i) { end - Duration::days(1) } else { start + Duration::days(2) };
                messages.push(TranscriptMessage {
                    direction: Direction::Inbound,
                    from: target.clone(),
                    to: "ab12345@m.test".into(),
                    time: at,
                    subject: "Re: s".into(),
                    body: "tell me more".into(),
                });
                if !interested.contains(&i) {
                    messages.push(out(at + Duration::hours(1)));
                }
            }
            ArchivedConversation {
                id: format!("c{i}"),
                strategy: "classifier-template".into(),
                target,
                messages,
                stop_reason: bounced.then(|| "undeliverable".into()),
                unreachable_at_first_send: bounced,
            }
        })
        .collect();
    Archive::new(conversations)
}

fn paper_tables() -> Outcome {
    let mut convs = strategy_fixture("classifier-template", 20, 49, 0);
    convs.extend(strategy_fixture("generator-a", 16, 33, 100));
    convs.extend(strategy_fixture("generator-b", 17, 68, 200));
    let per = compute_all_metrics(&Archive::new(convs), &MetricsOptions::default());
    for (s, want) in [("classifier-template", "2.45"), ("generator-a", "2.06"), ("generator-b", "4.00")] {
        let got = per[s].avg_replies_display.as_deref();
        ensure(got == Some(want), || format!("{s}: avg {got:?}, want {want}"))?;
    }

    let mut groups = vec![PopulationGroup {
        count: 130,
        agent: AgentKind::persistent(1.0, 0.0),
        agent_b: None,
        bounce: BounceMode::Never,
    }];
    groups.push(PopulationGroup { count: 747, agent: AgentKind::Silent, agent_b: None, bounce: BounceMode::Never });
    let cfg = SimConfig { n_targets: 877, master_seed: 877, duration_days: 39, groups, ..SimConfig::default() };
    let run = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let m = &run.instances[0].overall;
    ensure(m.attempted_targets == 877 && m.engaged_targets == 130, || {
        format!("{} engaged of {}", m.engaged_targets, m.attempted_targets)
    })?;
    ensure(m.response_rate_display == "14.82%", || m.response_rate_display.clone())?;
    let whole = baitmail_core::archive::percent_display(m.engaged_targets, m.attempted_targets, 0);
    ensure(whole == "15%", || whole.clone())?;
    let usage: Vec<u64> = run.instances[0].usage.values().copied().collect();
    ensure(usage == [293, 292, 292], || format!("usage {usage:?}"))?;

    let end = t(2023, 3, 3, 0, 0, 0);
    let a_engaged: BTreeSet<usize> = (0..62).collect();
    let b_engaged: BTreeSet<usize> = (0..27).chain(62..92).collect();
    let a_interested: BTreeSet<usize> = (0..4).chain(30..34).collect();
    let b_interested: BTreeSet<usize> = (0..4).chain(62..69).collect();
    let a = cross_fixture_side(&a_engaged, &a_interested, end);
    let b = cross_fixture_side(&b_engaged, &b_interested, end);
    let r = cross_instance_report(&a, &b, &CrossInstanceOptions::new(end)).map_err(|e| e.to_string())?;
    let got = (
        r.instance_a.engaged,
        r.instance_b.engaged,
        r.instance_a.dropout,
        r.instance_b.dropout,
        r.instance_a.still_interested,
        r.instance_b.still_interested,
        r.common_engaged,
        r.common_dropout,
        r.common_still_interested,
        r.total_involved,
    );
    ensure(got == (62, 57, 312, 317, 8, 11, 27, 282, 4, 374), || format!("fixture table {got:?}"))?;
    ensure(
        r.instance_a.response_rate_display == "12.16%" && r.instance_b.response_rate_display == "11.18%",
        || format!("{} / {}", r.instance_a.response_rate_display, r.instance_b.response_rate_display),
    )?;

    let persistent = AgentKind::persistent(1.0, 0.0);
    let group = |count, agent: &AgentKind, agent_b: &AgentKind, bounce| PopulationGroup {
        count,
        agent: agent.clone(),
        agent_b: Some(agent_b.clone()),
        bounce,
    };
    let silent = AgentKind::Silent;
    let cfg = SimConfig {
        n_targets: 510,
        master_seed: 2023,
        start: t(2023, 2, 20, 0, 0, 0),
        duration_days: 11,
        instances: 2,
        groups: vec![
            group(27, &persistent, &persistent, BounceMode::Never),
            group(35, &persistent, &silent, BounceMode::Never),
            group(30, &silent, &persistent, BounceMode::Never),
            group(136, &persistent, &persistent, BounceMode::FirstSend),
            group(282, &silent, &silent, BounceMode::Never),
        ],
        ..SimConfig::default()
    };
    let run = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let r = run.cross_instance.ok_or("no cross-instance report")?;
    let got = (r.instance_a.engaged, r.instance_b.engaged, r.common_engaged, r.common_dropout, r.total_involved);
    ensure(got == (62, 57, 27, 282, 374), || format!("simulated table {got:?}"))?;
    ensure(
        r.instance_a.response_rate_display == "12.16%" && r.instance_b.response_rate_display == "11.18%",
        || format!("{} / {}", r.instance_a.response_rate_display, r.instance_b.response_rate_display),
    )?;
    Ok("avg 2.45/2.06/4.00; sim 130/877 = 14.82% (15%); cross fixture and sim: engaged 62/57, common 27, dropout 282, total 374, 12.16%/11.18%".into())
}

// ---------------------------------------------------------------- 4

fn perturb(body: &str, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    for (i, w) in body.split(' ').enumerate() {
        if i > 0 {
            out.push_str([" ", "  ", "\n", " \t "][rng.random_range(0..4)]);
        }
        if rng.random_bool(0.5) {
            out.push_str(&w.to_uppercase());
        } else {
            out.push_str(w);
        }
    }
    if rng.random_bool(0.5) {
        out.push_str("\n\n");
    }
    out
}

fn autoresponder_filter() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let phrases = [
        "I am out of the office until Monday",
        "Thank you for your message we will respond shortly",
        "Your request has been received",
        "Auto reply please do not answer",
        "This mailbox is not monitored",
    ];
    let mut correct = 0;
    for case in 0..50 {
        let copies = if case % 2 == 0 { 3 + case % 3 } else { 2 };
        let dup = phrases[case % phrases.len()];
        let mut bodies: Vec<String> = (0..copies).map(|_| perturb(dup, &mut rng)).collect();
        for k in 0..rng.random_range(0..4) {
            bodies.push(format!("distinct human text {case} {k}"));
        }
        let expect_valid = copies < 3;
        let base = t(2022, 7, 12, 0, 0, 0);
        let conv = ArchivedConversation {
            id: format!("c{case}"),
            strategy: "s".into(),
            target: "x@y.test".into(),
            messages: bodies
                .iter()
                .enumerate()
                .map(|(i, b)| TranscriptMessage {
                    direction: Direction::Inbound,
                    from: "x@y.test".into(),
                    to: "ab12345@m.test".into(),
                    time: base + Duration::minutes(i as i64),
                    subject: "Re: s".into(),
                    body: b.clone(),
                })
                .collect(),
            stop_reason: None,
            unreachable_at_first_send: false,
        };
        let verdict = conversation_validity(&conv, None).is_valid();
        let plain: Vec<&str> = (0..copies).map(|_| dup).collect();
        let unperturbed = baitmail_core::archive::detect_autoresponder(plain).is_valid();
        if verdict == expect_valid && unperturbed == expect_valid {
            correct += 1;
        } else {
            return Err(format!("case {case}: {copies} copies judged valid={verdict}"));
        }
    }
    Ok(format!("{correct}/50 cases correct"))
}

// ---------------------------------------------------------------- 5

#[derive(Clone, Default)]
struct Capture(Arc<Mutex<Vec<SendRequest>>>);

impl MailProvider for Capture {
    fn send(&mut self, request: &SendRequest) -> Result<ProviderResponse, ProviderError> {
        let mut sent = self.0.lock().unwrap();
        sent.push(request.clone());
        Ok(ProviderResponse::accepted(format!("cap-{}", sent.len())))
    }

    fn is_simulated(&self) -> bool {
        true
    }
}

/// Deliberately repeats a line of the scammer's latest message.
struct EchoGenerator;

impl TextGenerator for EchoGenerator {
    fn generate(&self, request: &GeneratorRequest) -> Result<GeneratorResponse, BridgeError> {
        let last = request
            .history
            .iter()
            .rev()
            .find(|t| t.role == Role::Scammer)
            .map_or("", |t| t.text.as_str());
        let echoed = last.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        Ok(GeneratorResponse { text: format!("{echoed}\nWhat should I do next?") })
    }
}

fn own_shared_lines(reply: &str, answered: &str) -> Vec<String> {
    let answered: BTreeSet<&str> = answered.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    reply
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && answered.contains(l))
        .map(str::to_owned)
        .collect()
}

fn formatting_conformance() -> Outcome {
    let capture = Capture::default();
    let sent = Arc::clone(&capture.0);
    let mut cfg = OrchestratorConfig::new("m.example");
    cfg.master_seed = 55;
    let responders = vec![
        RegisteredResponder::new("classifier-template", Box::new(ClassifierTemplateResponder::bundled()), None),
        RegisteredResponder::new(
            "echo",
            Box::new(GeneratorResponder { generator: Box::new(EchoGenerator), settings: GeneratorSettings::default() }),
            None,
        ),
    ];
    let mut orch = Orchestrator::new(cfg, responders, Box::new(capture)).map_err(|e| e.to_string())?;
    let corpus = bundled_corpus();
    let subjects = ["Business offer", "RE: Re: your funds", "re: Urgent", "Fwd: parcel", "Re:Re: hello"];
    let mut now = t(2022, 7, 12, 9, 0, 0);
    for i in 0..150 {
        let addr = format!("s{i:03}@scam.test");
        let report = ScamReport::new("feed", &addr, subjects[i % subjects.len()], &corpus[i % corpus.len()].text, now)
            .map_err(|e| e.to_string())?;
        orch.ingest_report(report).map_err(|e| e.to_string())?;
        orch.review_target(&EmailAddress::parse(&addr).unwrap(), ReviewDecision::Approve, "mod", "", now)
            .map_err(|e| e.to_string())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lines = [
        "Please send the processing fee today.",
        "Best,",
        "My manager is waiting.",
        "What should I do next?",
        "Kindly reply with your bank details.",
        "God bless you.",
    ];
    let mut checked = 0usize;
    let mut seq = 0u64;
    let mut round = 0;
    while checked < 1000 {
        round += 1;
        ensure(round < 200, || format!("only {checked} emails after 200 rounds"))?;
        let answering: BTreeMap<String, String> = orch
            .conversations()
            .map(|c| {
                let body = if c.count(MessageDirection::Outbound) == 0 {
                    c.solicitation.body_text.clone()
                } else {
                    c.unanswered_bodies().join("\n")
                };
                (c.target_address.to_string(), body)
            })
            .collect();
        now += Duration::minutes(10);
        orch.tick(now).map_err(|e| e.to_string())?;
        let batch: Vec<SendRequest> = std::mem::take(&mut *sent.lock().unwrap());
        for req in &batch {
            let conv = orch
                .conversations()
                .find(|c| c.target_address.as_str() == req.to)
                .ok_or_else(|| format!("mail to unknown {}", req.to))?;
            let name = &conv.persona.fake_name;
            let rest = req.subject.strip_prefix("Re: ").ok_or_else(|| format!("subject `{}`", req.subject))?;
            ensure(!rest.to_lowercase().starts_with("re:"), || format!("double prefix `{}`", req.subject))?;
            let local = req.from_address.split('@').next().unwrap_or("");
            ensure(mailname_pattern().is_match(local), || format!("mailname `{local}`"))?;
            let body_lines: Vec<&str> = req.text.lines().collect();
            ensure(body_lines.ends_with(&["Best,", name.as_str()]) || req.text.ends_with(name.as_str()), || {
                format!("no signature in {:?}", req.text)
            })?;
            let unsigned = if body_lines.ends_with(&["Best,", name.as_str()]) {
                body_lines[..body_lines.len() - 2].join("\n")
            } else {
                req.text.clone()
            };
            let answered = answering.get(&req.to).cloned().unwrap_or_default();
            let shared = own_shared_lines(&unsigned, &answered);
            ensure(shared.is_empty(), || format!("reply to {} quotes {shared:?}", req.to))?;
            ensure(strip_tags(&req.html) == canonical_text(&req.text) && !req.text.is_empty(), || {
                format!("html/text mismatch for {}", req.to)
            })?;
            checked += 1;
        }
        let targets: Vec<(String, String, String)> = orch
            .conversations()
            .filter(|c| !c.has_unanswered_inbound() && c.count(MessageDirection::Outbound) > 0)
            .map(|c| {
                let subject = c.messages.last().map_or(String::new(), |m| m.subject.clone());
                (c.target_address.to_string(), c.persona.address().to_string(), subject)
            })
            .collect();
        for (from, to, subject) in targets {
            seq += 1;
            let n = rng.random_range(1..4);
            let mut body: Vec<String> = (0..n).map(|_| (*lines.choose(&mut rng).unwrap()).to_string()).collect();
            body.push(format!("Reference {seq}."));
            orch.admit_inbound(InboundEmail {
                message_key: format!("k{seq}"),
                from: EmailAddress::parse(&from).unwrap(),
                to: EmailAddress::parse(&to).unwrap(),
                subject: format!("RE: {subject}"),
                body_text: body.join("\n"),
                received_at: now + Duration::minutes(1),
                parse_warning: None,
            })
            .map_err(|e| e.to_string())?;
        }
        now += Duration::minutes(1);
    }
    Ok(format!("{checked} outbound emails conform"))
}

// ---------------------------------------------------------------- 6

fn random_body(rng: &mut ChaCha8Rng) -> String {
    let pieces = ["hello", "From: someone@x.test", "To: you", "Time: 2022-01-01 00:00:00", "", "  indented", "SUBJECT: fake", "ünïcödé ✓"];
    let n = rng.random_range(0..6);
    let mut lines: Vec<&str> = (0..n).map(|_| *pieces.choose(rng).unwrap()).collect();
    // A blank line followed by a header triple is a record boundary by definition.
    for i in 0..lines.len() {
        if lines[i].is_empty() && lines.get(i + 1).is_some_and(|l| l.starts_with("From: ")) {
            lines[i] = "-";
        }
    }
    if lines.first().is_some_and(|l| l.starts_with("From: ")) && rng.random_bool(0.5) {
        lines.insert(0, "x");
    }
    lines.join("\n")
}

fn transcript_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..500 {
        let target = format!("t{case}@scam.test");
        let persona = "qz12345@m**************p".to_string();
        let mut time = t(2022, 7, 12, 17, 15, 18);
        let mut msgs = vec![TranscriptMessage {
            direction: Direction::Solicitation,
            from: target.clone(),
            to: CRAWLER.into(),
            time,
            subject: "Offer".into(),
            body: random_body(&mut rng),
        }];
        for _ in 0..rng.random_range(0..8) {
            time += Duration::seconds(rng.random_range(0..400_000));
            let inbound = rng.random_bool(0.5);
            let subject = ["Re: Offer", "", "   spaced", "Re: Re: x"][rng.random_range(0..4)];
            msgs.push(TranscriptMessage {
                direction: if inbound { Direction::Inbound } else { Direction::Outbound },
                from: if inbound { target.clone() } else { persona.clone() },
                to: if inbound { persona.clone() } else { target.clone() },
                time,
                subject: subject.into(),
                body: random_body(&mut rng),
            });
        }
        let text = export_transcript(&msgs).map_err(|e| e.to_string())?;
        let back = parse_transcript(&text, Some(&target)).map_err(|e| format!("case {case}: {e}"))?;
        ensure(back == msgs, || format!("case {case} differs after round trip:\n{text}"))?;
    }

    let golden = fixtures().join("golden");
    for (file, count, pattern) in [
        ("template_strategy.txt", 6, "SOIOIO"),
        ("generator_strategy.txt", 3, "SOI"),
    ] {
        let raw = std::fs::read_to_string(golden.join(file)).map_err(|e| e.to_string())?;
        let msgs = parse_transcript(&raw, None).map_err(|e| format!("{file}: {e}"))?;
        ensure(msgs.len() == count, || format!("{file}: {} messages", msgs.len()))?;
        let dirs: String = msgs
            .iter()
            .map(|m| match m.direction {
                Direction::Solicitation => 'S',
                Direction::Inbound => 'I',
                Direction::Outbound => 'O',
            })
            .collect();
        ensure(dirs == pattern, || format!("{file}: directions {dirs}"))?;
        let again = export_transcript(&msgs).map_err(|e| e.to_string())?;
        ensure(again == raw, || format!("{file}: export is not byte-identical"))?;
    }
    let first = parse_transcript(&std::fs::read_to_string(golden.join("template_strategy.txt")).unwrap(), None)
        .map_err(|e| e.to_string())?;
    ensure(first[0].time == parse_time("2022-07-12 17:15:18").unwrap() && first[0].to == CRAWLER, || {
        "first record header".into()
    })?;

    let loaded = read_archive_dir(&fixtures().join("dataset")).map_err(|e| e.to_string())?;
    let stats = corpus_stats(&loaded.archive, loaded.skipped.len());
    let got = (stats.conversations, stats.messages, stats.pairs);
    ensure(got == (3, 11, 4) && stats.skipped == 0, || format!("dataset stats {got:?}"))?;
    Ok("500 round trips identical; 2 golden files byte-exact; dataset fixture (3, 11, 4); released dataset not fetched".into())
}

// ---------------------------------------------------------------- 7

fn least_used_assignment() -> Outcome {
    let three = || -> Vec<ResponderDescriptor> {
        ["classifier-template", "generator-a", "generator-b"]
            .into_iter()
            .map(|id| ResponderDescriptor::new(id, ResponderKind::ClassifierTemplate, None))
            .collect()
    };
    let mut reg = three();
    for _ in 0..877 {
        assign_responder(&mut reg).map_err(|e| e.to_string())?;
    }
    let counts: Vec<u64> = reg.iter().map(|d| d.usage_count).collect();
    let spread = counts.iter().max().unwrap() - counts.iter().min().unwrap();
    ensure(spread <= 1, || format!("877 assignments spread {counts:?}"))?;
    let mut reg = three();
    for _ in 0..7 {
        assign_responder(&mut reg).map_err(|e| e.to_string())?;
    }
    let seven: Vec<u64> = reg.iter().map(|d| d.usage_count).collect();
    ensure(seven == [3, 2, 2], || format!("7 assignments {seven:?}"))?;

    let cfg = SimConfig {
        n_targets: 877,
        master_seed: 7,
        duration_days: 2,
        mix: vec![MixEntry { weight: 1.0, agent: AgentKind::Silent }],
        ..SimConfig::default()
    };
    let run = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let usage: Vec<u64> = run.instances[0].usage.values().copied().collect();
    let spread = usage.iter().max().unwrap() - usage.iter().min().unwrap();
    ensure(spread <= 1 && usage.iter().sum::<u64>() == 877, || format!("orchestrated usage {usage:?}"))?;
    Ok(format!("877 -> {counts:?}; 7 -> (3,2,2); orchestrated 877 -> {usage:?}"))
}

// ---------------------------------------------------------------- 8

fn raw_mail(i: usize, from: &str, to: &str, parent: Option<usize>) -> String {
    let mut raw = format!(
        "Message-ID: <m{i}@corp>\nDate: Mon, 14 May 2001 {:02}:00:00 -0700\nFrom: {from}\nTo: {to}\nSubject: {}Quarterly numbers\n",
        8 + i % 12,
        if parent.is_some() { "RE: " } else { "" }
    );
    if let Some(p) = parent {
        raw.push_str(&format!("In-Reply-To: <m{p}@corp>\n"));
    }
    raw.push_str(&format!("\nMessage number {i} in the thread.\n"));
    raw
}

fn corpus_pipeline() -> Outcome {
    for n in 2..=12 {
        let msgs: Vec<_> = (0..n)
            .map(|i| {
                let (a, b) = if i % 2 == 0 { ("ann@corp.test", "ben@corp.test") } else { ("ben@corp.test", "ann@corp.test") };
                parse_mail(raw_mail(i, a, b, i.checked_sub(1)).as_bytes()).ok_or(format!("unparsable mail {i}"))
            })
            .collect::<Result<_, _>>()?;
        let chains = thread_conversations(&msgs);
        ensure(chains.len() == 1 && chains[0].messages.len() == n, || format!("n={n}: chains {}", chains.len()))?;
        let pairs = enron_pairs(&chains);
        ensure(pairs.len() == n - 1, || format!("n={n}: {} pairs", pairs.len()))?;
    }

    let mailbox = read_maildir(&fixtures().join("maildir")).map_err(|e| e.to_string())?;
    let chains = thread_conversations(&mailbox.messages);
    ensure(chains.len() == 1 && chains[0].messages.len() == 4, || format!("maildir chains {}", chains.len()))?;
    let pairs = enron_pairs(&chains);
    let want = [
        ("Bob, can you send me the revised pipeline schedule for June?", "Sure, I will have it to you by noon."),
        ("Sure, I will have it to you by noon.", "Got it, thanks. The Tuesday volumes look low though."),
        ("Got it, thanks. The Tuesday volumes look low though.", "Maintenance on the compressor. Volumes recover Wednesday."),
    ];
    let got: Vec<(&str, &str)> = pairs.iter().map(|p| (p.prompt.as_str(), p.reply.as_str())).collect();
    ensure(got == want, || format!("maildir pairs {got:?}"))?;

    let loaded = read_archive_dir(&fixtures().join("bait10")).map_err(|e| e.to_string())?;
    ensure(loaded.archive.conversations.len() == 10, || "bait fixture size".into())?;
    let tagged: Vec<RoleTagged> = loaded.archive.conversations.iter().map(RoleTagged::from_archived).collect();
    let pairs = extract_bait_pairs(&tagged);
    let expected: Vec<(String, String)> = serde_json::from_str(
        &std::fs::read_to_string(fixtures().join("bait10_expected_pairs.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let from_file = parse_pairs(&write_pairs(&pairs)).map_err(|e| e.to_string())?;
    ensure(from_file == expected, || format!("bait pairs {from_file:?}"))?;

    let mapped: Vec<ScamCategory> = FineLabel::ALL.iter().map(|f| coarsen_labels(*f)).collect();
    ensure(mapped.len() == 11, || "coarsen not total".into())?;
    ensure(
        coarsen_labels(FineLabel::Romance) == ScamCategory::Romance
            && coarsen_labels(FineLabel::Lottery) == ScamCategory::Lottery
            && coarsen_labels(FineLabel::Other) == ScamCategory::Other,
        || "fixed classes moved".into(),
    )?;
    let mut custom: BTreeMap<FineLabel, ScamCategory> = FineLabel::ALL.iter().map(|f| (*f, coarsen_labels(*f))).collect();
    custom.insert(FineLabel::Romance, ScamCategory::Other);
    ensure(LabelMap::new(custom).is_err(), || "moving Romance was accepted".into())?;
    Ok(format!("chains n=2..12 give n-1 pairs; maildir 3 pairs; bait fixture {} pairs; coarsening total", expected.len()))
}

// ---------------------------------------------------------------- 9

fn toy_corpus() -> Vec<LabelledText> {
    let vocab = [
        (ScamCategory::Transactional, ["contract", "invoice", "shipment", "partner"]),
        (ScamCategory::NonTransactional, ["orphan", "charity", "illness", "widow"]),
        (ScamCategory::Romance, ["darling", "lonely", "heart", "kisses"]),
        (ScamCategory::Lottery, ["jackpot", "raffle", "winner", "draw"]),
        (ScamCategory::Other, ["parcel", "password", "verify", "mailbox"]),
    ];
    let mut out = Vec::new();
    for (category, words) in vocab {
        for a in words {
            for b in words {
                if a != b {
                    out.push(LabelledText { category, text: format!("{a} {b} {a}") });
                }
            }
        }
    }
    out
}

fn baseline_classifier() -> Outcome {
    let (_, toy) = train_baseline_classifier(&toy_corpus(), 9, 0.25).map_err(|e| e.to_string())?;
    ensure(toy.accuracy == 1.0, || format!("toy accuracy {}", toy.accuracy))?;
    let corpus = bundled_corpus();
    let (m1, r1) = train_baseline_classifier(&corpus, 42, 0.3).map_err(|e| e.to_string())?;
    let (m2, r2) = train_baseline_classifier(&corpus, 42, 0.3).map_err(|e| e.to_string())?;
    ensure(m1 == m2 && r1 == r2, || "training not deterministic".into())?;
    ensure(r1.accuracy >= 0.60, || format!("bundled accuracy {:.4}", r1.accuracy))?;
    let text = r1.render();
    let header: Vec<&str> = text.lines().next().unwrap_or("").split_whitespace().collect();
    ensure(header == ["precision", "recall", "f1-score", "support"], || format!("header {header:?}"))?;
    for label in ["accuracy", "macro avg", "weighted avg"] {
        ensure(text.lines().any(|l| l.trim_start().starts_with(label)), || format!("missing `{label}` row"))?;
    }
    ensure(r1.rows.len() == 5, || "expected 5 class rows".into())?;
    Ok(format!("toy 1.0000; bundled holdout accuracy {:.4} over {} texts", r1.accuracy, r1.total))
}

// ---------------------------------------------------------------- 10

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let cfg = SimConfig {
        n_targets: 300,
        master_seed: 99,
        duration_days: 14,
        instances: 2,
        bounce_rate: 0.1,
        late_bounce_rate: 0.05,
        transient_rate: 0.05,
        operator_stop_rate: 0.05,
        stray_rate: 0.05,
        reject_rate: 0.05,
        ..SimConfig::default()
    };
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_run(&run_experiment(&cfg).map_err(|e| e.to_string())?, a.path()).map_err(|e| e.to_string())?;
    write_run(&run_experiment(&cfg).map_err(|e| e.to_string())?, b.path()).map_err(|e| e.to_string())?;
    let fa = files_under(a.path());
    let fb = files_under(b.path());
    ensure(fa.len() > 3, || "too few output files".into())?;
    ensure(fa == fb, || "outputs differ between runs".into())?;
    let bytes: usize = fa.values().map(Vec::len).sum();
    Ok(format!("{} files, {bytes} bytes identical across two runs", fa.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("policy suite", policy_suite),
        ("metrics oracle equivalence", metrics_oracle),
        ("published table reproduction", paper_tables),
        ("autoresponder filter", autoresponder_filter),
        ("formatting conformance", formatting_conformance),
        ("transcript round trip", transcript_round_trip),
        ("least-used assignment", least_used_assignment),
        ("corpus pipeline", corpus_pipeline),
        ("baseline classifier", baseline_classifier),
        ("determinism", determinism),
    ];
    let suite = Instant::now();
    let mut out = std::io::stdout();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        let line = match result {
            Ok(detail) => format!("PASS criterion {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                format!("FAIL criterion {:>2} {name} ({secs:.1}s): {why}", i + 1)
            }
        };
        writeln!(out, "{line}").unwrap();
    }
    let total = suite.elapsed();
    writeln!(out, "acceptance wall time {:.1}s (budget 300s)", total.as_secs_f64()).unwrap();
    if total > StdDuration::from_secs(300) {
        failed += 1;
        writeln!(out, "FAIL wall time over budget").unwrap();
    }
    if failed > 0 {
        writeln!(out, "{failed} acceptance criteria failed").unwrap();
        std::process::exit(1);
    }
}

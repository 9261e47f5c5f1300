//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the
//! process fails if any criterion does.

use std::time::{Duration, Instant};

use defcal::bisim::{
    accepts_weak_trace, branching_bisimilar, check_r_is_bisimulation, has_tau_cycle, relabel,
    BisimVerdict, Granularity,
};
use defcal::corpus::{self, list_sum_source, MUTANTS, PROGRAMS};
use defcal::explore::{
    canonicalize, check_preservation, check_progress, explore, run, ExploreBounds, Lts, Outcome,
    SchedulerPolicy, Trace,
};
use defcal::parser::{parse_program, parse_rhs};
use defcal::runtime::{classify, Configuration, FutureState, Rule, Status, Value};
use defcal::stats::list_sum_table;
use defcal::syntax::{BaseType, FutureId, Program, Stmt, TypeExpr};
use defcal::transform::fwd_elim;
use defcal::typecheck::{
    check_program, collapse, lift, subtype, type_of_rhs, ForwardMode, RawType, TypeEnv,
};

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn program(name: &str) -> Program {
    corpus::get(name).unwrap().parse().unwrap()
}

/// Strict where the program allows it, flexible otherwise.
fn mode_of(p: &Program) -> ForwardMode {
    if check_program(p, ForwardMode::Strict).is_err() {
        ForwardMode::Flexible
    } else {
        ForwardMode::Strict
    }
}

fn explore_full(p: &Program, mode: ForwardMode) -> Result<Lts, String> {
    let lts = explore(p, ExploreBounds::default(), mode).map_err(|e| e.to_string())?;
    ensure(!lts.truncated, "exploration truncated")?;
    Ok(lts)
}

fn head(cn: &Configuration, f: u32) -> Option<String> {
    match cn.state(FutureId(f))? {
        FutureState::Unresolved(frames) => Some(frames.last()?.stmt.split_head().0.to_string()),
        _ => None,
    }
}

/// Reader heads and labels at each of the main task's get* steps, up to and
/// including the first GET-DATA.
fn first_get(trace: &Trace) -> Vec<(Rule, String)> {
    let mut out = Vec::new();
    for (label, cn) in &trace.steps {
        if label.actor != FutureId(0) || !matches!(label.rule, Rule::GetFuture | Rule::GetData) {
            continue;
        }
        let cn = canonicalize(cn);
        out.push((label.rule, head(&cn, 0).unwrap_or_default()));
        if label.rule == Rule::GetData {
            break;
        }
    }
    out
}

fn step_after(trace: &Trace, rule: Rule, actor: u32) -> Option<Configuration> {
    trace
        .steps
        .iter()
        .find(|(l, _)| l.rule == rule && l.actor == FutureId(actor))
        .map(|(_, cn)| canonicalize(cn))
}

fn criterion1() -> Verdict {
    let start = Instant::now();
    let p = program("delegate");
    let t = run(&p, SchedulerPolicy::RoundRobin, ForwardMode::Strict, 10_000)
        .map_err(|e| e.to_string())?;
    let (l0, c0) = &t.steps[0];
    ensure(
        l0.rule == Rule::InvkAsync && l0.actor == FutureId(0),
        "first step is not INVK-ASYNC by f0",
    )?;
    let c0 = canonicalize(c0);
    ensure(
        head(&c0, 0).as_deref() == Some("x = f1"),
        "caller head after INVK-ASYNC is not `x = f1`",
    )?;
    match c0.state(FutureId(1)) {
        Some(FutureState::Unresolved(q))
            if q[0].fn_name == "foo" && q[0].locals.get("x") == Some(&Value::Int(1)) => {}
        _ => return Err("f1 does not run foo with [x -> 1]".into()),
    }
    let c1 = step_after(&t, Rule::ReturnAsync, 1).ok_or("foo never returns")?;
    ensure(
        c1.state(FutureId(1)) == Some(&FutureState::Resolved(Value::Fut(FutureId(2))))
            && c1.state(FutureId(2)) == Some(&FutureState::Resolved(Value::Int(4))),
        "RETURN-ASYNC does not yield f1(f2) f2(4)",
    )?;
    let reader = first_get(&t);
    let expected = vec![
        (Rule::GetFuture, "y = get* f2".to_string()),
        (Rule::GetFuture, "y = get* 4".to_string()),
        (Rule::GetData, "y = 4".to_string()),
    ];
    ensure(reader == expected, format!("reader steps {reader:?}"))?;
    let elapsed = start.elapsed();
    ensure(
        elapsed < Duration::from_secs(1),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "INVK-ASYNC, RETURN-ASYNC f1(f2) f2(4), GET-FUTURE GET-FUTURE GET-DATA in {elapsed:?}"
    ))
}

fn criterion2() -> Verdict {
    let start = Instant::now();
    let p = program("delegate_forward");
    let mut policies = vec![SchedulerPolicy::RoundRobin];
    policies.extend((0..20).map(SchedulerPolicy::SeededRandom));
    for policy in policies {
        let t = run(&p, policy, ForwardMode::Strict, 10_000).map_err(|e| e.to_string())?;
        let c1 = step_after(&t, Rule::ForwardAsync, 1).ok_or("foo never forwards")?;
        ensure(
            c1.state(FutureId(1)) == Some(&FutureState::Chained(FutureId(2))),
            format!("{policy:?}: FORWARD-ASYNC does not yield f1(chain f2)"),
        )?;
        let c2 = step_after(&t, Rule::ChainUpdate, 1).ok_or("f1 is never updated")?;
        ensure(
            c2.state(FutureId(1)) == Some(&FutureState::Resolved(Value::Int(4))),
            format!("{policy:?}: CHAIN-UPDATE does not yield f1(4)"),
        )?;
        let reader = first_get(&t);
        let expected = vec![
            (Rule::GetFuture, "y = get* 4".to_string()),
            (Rule::GetData, "y = 4".to_string()),
        ];
        ensure(
            reader == expected,
            format!("{policy:?}: reader steps {reader:?}"),
        )?;
    }
    let elapsed = start.elapsed();
    ensure(
        elapsed < Duration::from_secs(1),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "FORWARD-ASYNC, CHAIN-UPDATE f1(4), GET-FUTURE GET-DATA under 21 schedules in {elapsed:?}"
    ))
}

fn criterion3() -> Verdict {
    let mut policies = vec![SchedulerPolicy::RoundRobin];
    policies.extend((0..20).map(SchedulerPolicy::SeededRandom));
    for name in ["delegate", "delegate_forward"] {
        let p = program(name);
        for &policy in &policies {
            let t = run(&p, policy, ForwardMode::Strict, 10_000).map_err(|e| e.to_string())?;
            ensure(
                t.outcome == Outcome::Terminated(Some(Value::Int(10))),
                format!("{name} under {policy:?}: {:?}", t.outcome),
            )?;
        }
    }
    Ok("final value 10 under round-robin and 20 seeds".into())
}

fn criterion4() -> Verdict {
    let start = Instant::now();
    let mut n = 0;
    let mut pairs = 0;
    for e in PROGRAMS.iter().filter(|e| e.delegation) {
        let p = e.parse().map_err(|err| format!("{}: {err:?}", e.name))?;
        let d = fwd_elim(&p).map_err(|err| err.to_string())?;
        let lf = explore_full(&p, ForwardMode::Strict).map_err(|m| format!("{}: {m}", e.name))?;
        let ld = explore_full(&d, ForwardMode::Strict).map_err(|m| format!("{}: {m}", e.name))?;
        for g in [Granularity::Fine, Granularity::Coarse] {
            let r = branching_bisimilar(&relabel(&lf, g), &relabel(&ld, g))
                .map_err(|err| err.to_string())?;
            ensure(
                r.is_bisimilar(),
                format!("{}: not bisimilar ({g:?} labels)", e.name),
            )?;
        }
        let c =
            check_r_is_bisimulation(&lf, &ld, 1_000_000).map_err(|c| format!("{}: {c}", e.name))?;
        ensure(
            c.unchecked == 0,
            format!("{}: {} pairs unchecked", e.name, c.unchecked),
        )?;
        pairs += c.pairs;
        n += 1;
    }
    ensure(n >= 8, format!("only {n} programs"))?;
    let elapsed = start.elapsed();
    ensure(
        elapsed < Duration::from_secs(60),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "{n} programs bisimilar, R checked on {pairs} pairs, {elapsed:?}"
    ))
}

fn criterion5() -> Verdict {
    let original = explore_full(&program("checked"), ForwardMode::Strict)?;
    let of = relabel(&original, Granularity::Fine);
    for m in MUTANTS {
        let lm = explore_full(&m.parse().unwrap(), ForwardMode::Strict)?;
        let om = relabel(&lm, Granularity::Fine);
        let r = branching_bisimilar(&of, &om).map_err(|e| e.to_string())?;
        let BisimVerdict::NotBisimilar { witness, .. } = r.verdict else {
            return Err(format!("{} reported bisimilar", m.name));
        };
        ensure(!witness.is_empty(), format!("{}: empty witness", m.name))?;
        ensure(
            accepts_weak_trace(&of, &witness) != accepts_weak_trace(&om, &witness),
            format!("{}: witness does not distinguish", m.name),
        )?;
    }
    Ok(format!(
        "{} mutants distinguished by replayable witnesses",
        MUTANTS.len()
    ))
}

/// Every exploration used by the preservation and progress criteria.
fn all_explorations() -> Result<Vec<(String, Program, Lts)>, String> {
    let mut out = Vec::new();
    for e in PROGRAMS.iter().chain(MUTANTS) {
        let p = e.parse().unwrap();
        let mode = mode_of(&p);
        out.push((e.name.to_string(), p.clone(), explore_full(&p, mode)?));
        if let Ok(d) = fwd_elim(&p) {
            if d != p {
                let lts = explore_full(&d, ForwardMode::Strict)?;
                out.push((format!("{} (fwdElim)", e.name), d, lts));
            }
        }
    }
    for n in 1..=5 {
        for forward in [true, false] {
            let p = parse_program(&list_sum_source(n, forward)).unwrap();
            let lts = explore_full(&p, ForwardMode::Strict)?;
            out.push((format!("list sum {n} {forward}"), p, lts));
        }
    }
    Ok(out)
}

fn criterion6(all: &[(String, Program, Lts)]) -> Verdict {
    let mut states = 0;
    for (name, p, lts) in all {
        check_preservation(p, lts).map_err(|(i, e)| format!("{name}: state {i}: {e:?}"))?;
        states += lts.states.len();
    }
    ensure(states >= 10_000, format!("only {states} states"))?;
    // Negative control: a pending task whose int parameter holds a bool.
    let (_, p, lts) = all.iter().find(|(n, ..)| n == "delegate").unwrap();
    let mut corrupted = lts.clone();
    let target = corrupted
        .states
        .iter_mut()
        .find_map(|cn| match cn.futures.get_mut(&FutureId(1)) {
            Some(FutureState::Unresolved(q)) => q[0].locals.get_mut("t"),
            _ => None,
        })
        .ok_or("no pending foo task")?;
    *target = Value::Bool(true);
    ensure(
        check_preservation(p, &corrupted).is_err(),
        "corrupted state accepted",
    )?;
    Ok(format!(
        "{} explorations, {states} states well typed; corruption caught",
        all.len()
    ))
}

fn criterion7(all: &[(String, Program, Lts)]) -> Verdict {
    for (name, _, lts) in all {
        check_progress(lts).map_err(|i| format!("{name}: state {i} stuck while running"))?;
        for i in lts.leaves() {
            ensure(
                !matches!(classify(&lts.states[i]), Status::Running),
                format!("{name}: leaf {i} still running"),
            )?;
        }
    }
    let p = program("cycle");
    let lf = explore_full(&p, ForwardMode::Strict)?;
    let ld = explore_full(&fwd_elim(&p).unwrap(), ForwardMode::Strict)?;
    let deadlocked = |lts: &Lts| {
        lts.leaves()
            .into_iter()
            .any(|i| matches!(classify(&lts.states[i]), Status::Deadlocked(_)))
    };
    let rr = run(&p, SchedulerPolicy::RoundRobin, ForwardMode::Strict, 10_000)
        .map_err(|e| e.to_string())?;
    ensure(
        matches!(rr.outcome, Outcome::Deadlocked(_)),
        "cycle does not deadlock under round-robin",
    )?;
    ensure(deadlocked(&lf), "no deadlock in the DeF+F cycle LTS")?;
    ensure(
        !has_tau_cycle(&relabel(&lf, Granularity::Fine)),
        "DeF+F cycle LTS diverges",
    )?;
    ensure(!deadlocked(&ld), "deadlock in the DeF cycle LTS")?;
    ensure(
        has_tau_cycle(&relabel(&ld, Granularity::Fine)),
        "no silent cycle in the DeF LTS",
    )?;
    let r = branching_bisimilar(
        &relabel(&lf, Granularity::Fine),
        &relabel(&ld, Granularity::Fine),
    )
    .map_err(|e| e.to_string())?;
    ensure(r.is_bisimilar(), "cycle pair not bisimilar")?;
    Ok(format!(
        "{} explorations make progress; cycle deadlocks in DeF+F, diverges silently in DeF, bisimilar",
        all.len()
    ))
}

fn criterion8() -> Verdict {
    let rows = list_sum_table(&[1, 5, 10, 20], 100_000).map_err(|e| e.to_string())?;
    let mut table = Vec::new();
    for r in &rows {
        let n = r.n as usize;
        let (f, d) = (&r.report.forward, &r.report.eliminated);
        ensure(
            d.reader_get_future == n + 1 && d.reader_get_data == 1,
            format!(
                "n={n}: fwdElim reader {} GET-FUTURE {} GET-DATA",
                d.reader_get_future, d.reader_get_data
            ),
        )?;
        ensure(
            f.reader_get_future == 1 && f.reader_get_data == 1 && f.chain_updates == n,
            format!(
                "n={n}: forward* reader {} GET-FUTURE, {} CHAIN-UPDATE",
                f.reader_get_future, f.chain_updates
            ),
        )?;
        ensure(f.outcome == d.outcome, format!("n={n}: outcomes differ"))?;
        table.push(format!(
            "n={n}: {}/{}",
            d.reader_get_future, f.reader_get_future
        ));
    }
    Ok(format!(
        "reader GET-FUTURE without/with forward*: {}",
        table.join(", ")
    ))
}

fn criterion9() -> Verdict {
    use BaseType::{Bool, Int};
    let flow = RawType::flow;
    let base = RawType::Base;
    let mut cases = 0;
    let mut check = |ok: bool, what: &str| -> Result<(), String> {
        cases += 1;
        ensure(ok, what)
    };
    check(
        collapse(&flow(flow(base(Int)))) == TypeExpr::Flow(Int),
        "Flow[Flow[int]]",
    )?;
    check(
        collapse(&flow(flow(flow(base(Bool))))) == TypeExpr::Flow(Bool),
        "Flow^3[bool]",
    )?;
    check(
        collapse(&flow(base(Int))) == TypeExpr::Flow(Int),
        "Flow[int]",
    )?;
    check(collapse(&base(Bool)) == TypeExpr::Basic(Bool), "bool")?;
    check(
        lift(TypeExpr::Basic(Int)) == TypeExpr::Flow(Int),
        "lift int",
    )?;
    check(
        lift(TypeExpr::Flow(Bool)) == TypeExpr::Flow(Bool),
        "lift Flow[bool]",
    )?;
    check(
        subtype(TypeExpr::Basic(Int), TypeExpr::Flow(Int)),
        "int <: Flow[int]",
    )?;
    check(
        !subtype(TypeExpr::Flow(Int), TypeExpr::Basic(Int)),
        "Flow[int] </: int",
    )?;
    check(
        !subtype(TypeExpr::Basic(Int), TypeExpr::Flow(Bool)),
        "int </: Flow[bool]",
    )?;

    let p = program("delegate");
    let env = TypeEnv::of_program(&p).for_function(&p, "foo");
    let ty = |src: &str| type_of_rhs(&env, &parse_rhs(src).unwrap(), ForwardMode::Strict).ok();
    check(
        ty("!foo(1)") == Some(TypeExpr::Flow(Int)),
        "!foo(1) lifts 1 and collapses",
    )?;
    check(ty("!bar(t)") == Some(TypeExpr::Flow(Int)), "!bar(t)")?;
    check(ty("foo(1)") == Some(TypeExpr::Flow(Int)), "foo(1)")?;
    check(ty("get* x") == Some(TypeExpr::Basic(Int)), "get* x")?;
    check(ty("get* t") == Some(TypeExpr::Basic(Int)), "get* on an int")?;
    check(
        ty("get* 1") == Some(TypeExpr::Basic(Int)),
        "get* on a literal",
    )?;
    check(ty("foo(true)").is_none(), "foo(true) rejected")?;
    check(
        check_program(&p, ForwardMode::Strict).is_ok(),
        "delegate well typed",
    )?;

    let flexible = program("sync_forward_wait");
    let strict_errors = check_program(&flexible, ForwardMode::Strict)
        .err()
        .unwrap_or_default();
    check(
        strict_errors.iter().any(|e| e.rule == "T-FORWARD"),
        "strict mode does not reject forward* in an int function",
    )?;
    check(
        check_program(&flexible, ForwardMode::Flexible).is_ok(),
        "flexible mode rejects",
    )?;
    check(
        fwd_elim(&flexible).is_err(),
        "fwd_elim accepts a flexible-only program",
    )?;
    Ok(format!("{cases} typing cases"))
}

fn criterion10() -> Verdict {
    let flexible = program("sync_forward_wait");
    let t = run(
        &flexible,
        SchedulerPolicy::RoundRobin,
        ForwardMode::Flexible,
        10_000,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        matches!(t.outcome, Outcome::Deadlocked(_)),
        format!("flexible: {:?}", t.outcome),
    )?;
    ensure(
        t.labels().iter().any(|l| l.rule == Rule::CefForwardSync),
        "no CEF-FORWARD-SYNC step",
    )?;
    let stuck = t.final_configuration();
    let waits_in_inserted_get = stuck.futures.values().any(|st| match st {
        FutureState::Unresolved(q) => q.iter().any(|fr| {
            matches!(fr.stmt.split_head().0, Stmt::Assign { target, .. } if target.starts_with("$fwd"))
        }),
        _ => false,
    });
    ensure(
        waits_in_inserted_get,
        "deadlock does not involve the inserted get*",
    )?;
    let lf = explore_full(&flexible, ForwardMode::Flexible)?;
    ensure(
        lf.leaves()
            .iter()
            .any(|&i| matches!(classify(&lf.states[i]), Status::Deadlocked(_))),
        "no deadlocked state in the flexible LTS",
    )?;

    let strict = program("sync_forward_flow");
    let t = run(
        &strict,
        SchedulerPolicy::RoundRobin,
        ForwardMode::Strict,
        10_000,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        t.outcome == Outcome::Terminated(Some(Value::Int(42))),
        format!("strict: {:?}", t.outcome),
    )?;
    let ls = explore_full(&strict, ForwardMode::Strict)?;
    ensure(
        ls.leaves()
            .iter()
            .all(|&i| classify(&ls.states[i]) == Status::Terminated),
        "strict LTS has a non-terminated leaf",
    )?;
    Ok("flexible deadlocks on the inserted get*, strict terminates with 42 on every path".into())
}

fn main() {
    let all = all_explorations();
    let results: Vec<(&str, Verdict)> = vec![
        ("1 trace of the return example", criterion1()),
        ("2 trace of the forward* example", criterion2()),
        ("3 end-to-end result", criterion3()),
        ("4 forward elimination is a bisimulation", criterion4()),
        ("5 mutants are not bisimilar", criterion5()),
        (
            "6 preservation",
            all.as_ref()
                .map_err(Clone::clone)
                .and_then(|a| criterion6(a)),
        ),
        (
            "7 progress and the future cycle",
            all.as_ref()
                .map_err(Clone::clone)
                .and_then(|a| criterion7(a)),
        ),
        ("8 delegation step counts", criterion8()),
        ("9 type system", criterion9()),
        ("10 flexible versus strict forward", criterion10()),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {name}: FAIL ({why})");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

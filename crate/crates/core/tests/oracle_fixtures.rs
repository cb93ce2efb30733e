//! Oracle detector behavior on the hand-built contract fixtures.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use ruint::aliases::U256;

use blockeye_core::evm::{assemble, disassemble};
use blockeye_core::oracle::{analyze, render_report, AddressBook, OracleReport, ReportFormat, SinkKind, Verdict};
use blockeye_core::sym::{explore, BoundKind, ExploreConfig, Outcome};
use blockeye_testkit::fixtures::{addr, book, fixture_code, CURVE, DAI, NEGATIVE, TKN};
use blockeye_testkit::gen::random_program;
use blockeye_testkit::interp::{run, ConcreteEnv, Status};

const F_EMN_WITNESS: [usize; 28] =
    [38, 39, 40, 43, 44, 46, 47, 48, 50, 51, 52, 55, 56, 61, 63, 64, 65, 67, 68, 70, 71, 73, 75, 77, 79, 81, 102, 105];

fn report(name: &str) -> OracleReport {
    analyze(&fixture_code(name), &book(), &ExploreConfig::default()).unwrap()
}

fn keys(r: &OracleReport) -> BTreeSet<(usize, usize, SinkKind)> {
    r.findings.iter().map(|f| (f.source_site, f.sink_site, f.sink_kind)).collect()
}

#[test]
fn f_emn_single_call_argument_with_exact_witness() {
    let r = report("f_emn");
    assert_eq!(r.verdict, Verdict::Vulnerable);
    assert_eq!(r.findings.len(), 1);
    let f = &r.findings[0];
    assert_eq!((f.source_site, f.sink_site, f.sink_kind), (38, 105, SinkKind::CallArgument));
    assert_eq!(f.witness_trace, F_EMN_WITNESS);
    assert_eq!(r.stats.paths, 3);
    assert_eq!(r.stats.cuts, 0);
}

#[test]
fn f_emn_terminal_order() {
    let p = disassemble(&fixture_code("f_emn")).unwrap();
    let ex = explore(&p, &ExploreConfig::default(), &book());
    let outcomes: Vec<_> = ex.terminals.iter().map(|t| t.outcome).collect();
    assert_eq!(outcomes, [Outcome::Stop, Outcome::Revert, Outcome::Revert]);
}

#[test]
fn negatives_have_no_findings() {
    for name in NEGATIVE {
        let r = report(name);
        assert!(r.findings.is_empty(), "{name}: {:?}", r.findings);
        assert_ne!(r.verdict, Verdict::Vulnerable, "{name}");
    }
    assert_eq!(report("f_pop").verdict, Verdict::NotFound);
    assert_eq!(report("f_indep").verdict, Verdict::NotFound);
    assert_eq!(report("no_call").verdict, Verdict::NotFound);
}

#[test]
fn f_store_is_a_storage_write() {
    let r = report("f_store");
    assert_eq!(keys(&r), BTreeSet::from([(32, 39, SinkKind::StorageWrite)]));
    assert_eq!(r.findings[0].witness_trace, [32, 33, 34, 36, 37, 39]);
}

#[test]
fn f_branch_witness_crosses_the_branch() {
    let r = report("f_branch");
    assert_eq!(r.findings.len(), 1);
    let f = &r.findings[0];
    assert_eq!(f.sink_kind, SinkKind::StorageWrite);
    assert_eq!(f.witness_trace, [32, 33, 34, 36, 37, 40, 42, 43, 45, 46, 48]);
    assert!(!f.witness_trace.contains(&41), "the STOP branch is not on the witness");
}

#[test]
fn f_pay_is_a_value_transfer() {
    let r = report("f_pay");
    let kinds: Vec<_> = r.findings.iter().map(|f| f.sink_kind).collect();
    assert_eq!(kinds, [SinkKind::ValueTransfer]);
    assert_eq!(r.findings[0].source_site, 32);
}

#[test]
fn f_loop_is_cut_by_the_loop_bound() {
    let p = disassemble(&fixture_code("f_loop")).unwrap();
    let ex = explore(&p, &ExploreConfig::default(), &book());
    let outcomes: Vec<_> = ex.terminals.iter().map(|t| t.outcome).collect();
    assert_eq!(outcomes, [Outcome::BoundCut(BoundKind::LoopBound), Outcome::Stop, Outcome::Stop]);
    assert_eq!(report("f_loop").verdict, Verdict::Inconclusive(1));
}

#[test]
fn two_branch_yields_two_terminals() {
    let r = report("two_branch");
    assert_eq!(r.stats.paths, 2);
    assert_eq!(r.verdict, Verdict::NotFound);
}

/// Replays the F-EMN witness concretely: with inputs satisfying the path, the
/// reference interpreter walks the witness and the oracle's answer reaches the
/// transfer calldata byte for byte.
#[test]
fn f_emn_witness_replays_concretely() {
    let code = fixture_code("f_emn");
    let answer = |v: u64| ConcreteEnv {
        calldata: [[0u8; 4].as_slice(), &U256::from(7).to_be_bytes::<32>(), &[0u8; 32]].concat(),
        return_data: vec![U256::from(v).to_be_bytes::<32>().to_vec()],
        ..Default::default()
    };
    let a = run(&code, &answer(1000), 10_000);
    let b = run(&code, &answer(2000), 10_000);
    assert_eq!(a.status, Status::Stop);
    let start = a.trace.iter().position(|&o| o == 38).unwrap();
    assert_eq!(a.trace[start..start + F_EMN_WITNESS.len()], F_EMN_WITNESS);

    let token = U256::from_str_radix(&DAI[2..], 16).unwrap();
    let transfer = a.calls.iter().find(|c| c.site == 105).unwrap();
    assert_eq!(transfer.callee, token);
    assert_eq!(transfer.input[..4], [0xa9, 0x05, 0x9c, 0xbb]);
    assert_eq!(U256::from_be_slice(&transfer.input[36..68]), U256::from(1000));
    let other = b.calls.iter().find(|c| c.site == 105).unwrap();
    assert_ne!(transfer.input, other.input);
}

#[test]
fn shortest_witness_kept_when_paths_merge() {
    // both sides of the branch reach the same SSTORE; the right side is longer
    let code = assemble(&format!(
        "PUSH1 0x20\nPUSH1 0\nPUSH1 0\nPUSH1 0\nPUSH20 {CURVE}\nPUSH2 0xffff\nSTATICCALL\nPOP\n\
         PUSH1 0\nCALLDATALOAD\nPUSH2 @long\nJUMPI\nPUSH2 @sink\nJUMP\n\
         long:\nJUMPDEST\nPUSH1 1\nPOP\nPUSH1 1\nPOP\n\
         sink:\nJUMPDEST\nPUSH1 0\nMLOAD\nPUSH1 0\nSSTORE\nSTOP"
    ))
    .unwrap();
    let r = analyze(&code, &book(), &ExploreConfig::default()).unwrap();
    assert_eq!(r.stats.paths, 2);
    assert_eq!(r.findings.len(), 1);
    let short = &r.findings[0].witness_trace;
    assert!(!short.contains(&45), "{short:?}");

    let again = analyze(&code, &book(), &ExploreConfig::default()).unwrap();
    assert_eq!(r, again);
}

#[test]
fn book_growth_only_adds_findings() {
    let empty = AddressBook::default();
    let oracle_only = AddressBook::new([addr(CURVE)], [], false).unwrap();
    let full = book();
    let wildcard = AddressBook::new([addr(CURVE)], [addr(DAI), addr(TKN)], true).unwrap();
    let cfg = ExploreConfig::default();
    for name in blockeye_testkit::fixtures::CONTRACTS {
        let code = fixture_code(name);
        let chain: Vec<_> = [&empty, &oracle_only, &full, &wildcard]
            .iter()
            .map(|b| keys(&analyze(&code, b, &cfg).unwrap()))
            .collect();
        assert!(chain[0].is_empty(), "{name}");
        for pair in chain.windows(2) {
            assert!(pair[0].is_subset(&pair[1]), "{name}: {:?} not within {:?}", pair[0], pair[1]);
        }
    }
    // the DAI transfer only counts once DAI is a known token
    assert!(keys(&analyze(&fixture_code("f_emn"), &oracle_only, &cfg).unwrap()).is_empty());
}

#[test]
fn render_is_deterministic_and_well_formed() {
    for name in blockeye_testkit::fixtures::CONTRACTS {
        let r = report(name);
        let a = render_report(&r, ReportFormat::Json, None);
        let b = render_report(&report(name), ReportFormat::Json, None);
        assert_eq!(a, b, "{name}");
        assert_eq!(a.last(), Some(&b'\n'));
        let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
        assert_eq!(v["program_id"].as_str().unwrap().len(), 64);
        assert_eq!(v["findings"].as_array().unwrap().len(), r.findings.len());
        assert_eq!(render_report(&r, ReportFormat::Text, None), render_report(&r, ReportFormat::Text, None));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Without a configured oracle there is nothing to taint.
    #[test]
    fn no_source_no_finding(seed in any::<u64>(), blocks in 1usize..7) {
        let code = random_program(&mut StdRng::seed_from_u64(seed), blocks);
        let book = AddressBook::new([], [addr(DAI)], false).unwrap();
        let r = analyze(&code, &book, &ExploreConfig::default()).unwrap();
        prop_assert!(r.findings.is_empty());
        prop_assert!(r.info.is_empty());
    }
}

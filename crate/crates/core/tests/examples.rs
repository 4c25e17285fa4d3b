//! One test per documented operation example, driven through the public API.

use std::collections::BTreeSet;

use delib_core::coalition::{CoalitionStructure, DeliberativeCoalition};
use delib_core::engine::{self, GeneratorConfig};
use delib_core::geometry::{self, Location, Metric, Point};
use delib_core::oracle::{self, ExploreCaps};
use delib_core::scenario_io::{self, builtin_fixture};
use delib_core::space::{Agent, DeliberationSpace, ListedProposal, Proposal, ProposalSet};
use delib_core::transitions::{self, TransitionKind};
use delib_core::{AgentSet, Classification, Policy, Selector, Signature, Space, Structure};

fn pt(c: &[f64]) -> Point<f64> {
    Point::new(c.to_vec())
}

fn loc(c: &[f64]) -> Location<f64> {
    Location::Coords(pt(c))
}

fn euclid_space(agents: &[(&str, &[f64])], proposals: Option<&[(&str, &[f64])]>, r: &[f64]) -> Space {
    let agents = agents.iter().map(|(id, c)| Agent { id: id.to_string(), location: loc(c) }).collect();
    let proposals = match proposals {
        Some(ps) => ProposalSet::Finite(
            ps.iter().map(|(id, c)| ListedProposal { id: id.to_string(), location: loc(c) }).collect(),
        ),
        None => ProposalSet::Continuous,
    };
    DeliberationSpace::new(Metric::Euclidean { dim: r.len() }, agents, proposals, loc(r)).unwrap()
}

fn agent(s: &Space, id: &str) -> usize {
    s.agent_index(id).unwrap()
}

fn listed(s: &Space, id: &str) -> Proposal<f64> {
    Proposal::Listed(s.proposal_index(id).unwrap())
}

fn set(s: &Space, ids: &[&str]) -> AgentSet {
    ids.iter().map(|id| agent(s, id)).collect()
}

fn coalition(s: &Space, ids: &[&str], p: Proposal<f64>) -> DeliberativeCoalition<f64> {
    DeliberativeCoalition::new(set(s, ids), p)
}

fn ids(s: &Space, set: &AgentSet) -> Vec<String> {
    set.iter().map(|&v| s.agent_id(v).to_string()).collect()
}

fn approval_ids(s: &Space, v: &str) -> BTreeSet<String> {
    s.approval_set(agent(s, v)).unwrap().into_iter().map(|k| s.listed()[k].id.clone()).collect()
}

fn names(v: &[&str]) -> BTreeSet<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn sizes(d: &Structure) -> Vec<usize> {
    d.signature().0
}

// ---- geometry ----

#[test]
fn distance_examples() {
    let m = Metric::Euclidean { dim: 1 };
    assert_eq!(m.distance(&loc(&[1.0]), &loc(&[5.0])).unwrap(), 4.0);
    assert_eq!(m.distance(&loc(&[2.5]), &loc(&[2.5])).unwrap(), 0.0);
    let m3 = Metric::Euclidean { dim: 3 };
    let d = m3.distance(&loc(&[3.0, 0.0, 0.0]), &loc(&[0.0, 0.0, 2.0])).unwrap();
    assert!((d - 13f64.sqrt()).abs() < 1e-15);
}

#[test]
fn approves_examples() {
    let m1 = Metric::Euclidean { dim: 1 };
    assert!(!geometry::approves(&loc(&[1.0]), &loc(&[5.0]), &loc(&[0.0]), &m1).unwrap());
    assert!(!geometry::approves(&loc(&[1.0]), &loc(&[0.0]), &loc(&[0.0]), &m1).unwrap());
    let m2 = Metric::Euclidean { dim: 2 };
    assert!(geometry::approves(&loc(&[-3.0, 3.0]), &loc(&[0.0, 3.0]), &loc(&[0.0, 0.0]), &m2).unwrap());
}

fn example3_points() -> Vec<Point<f64>> {
    vec![pt(&[-3.0, 3.0]), pt(&[-3.0, 4.0]), pt(&[3.0, 3.0]), pt(&[3.0, 4.0])]
}

#[test]
fn nearest_point_in_hull_examples() {
    let (q, dist) = geometry::nearest_point_in_hull(&pt(&[0.0, 0.0]), &example3_points());
    assert!((q.coords()[0]).abs() < 1e-9 && (q.coords()[1] - 3.0).abs() < 1e-9, "{q:?}");
    assert!((dist - 3.0).abs() < 1e-9);

    let (q, dist) = geometry::nearest_point_in_hull(&pt(&[0.0, 3.5]), &example3_points());
    assert!((q.coords()[0]).abs() < 1e-9 && (q.coords()[1] - 3.5).abs() < 1e-9);
    assert!(dist.abs() < 1e-9);

    let (q, dist) = geometry::nearest_point_in_hull(&pt(&[0.0]), &[pt(&[3.0]), pt(&[9.0])]);
    assert!((q.coords()[0] - 3.0).abs() < 1e-12);
    assert!((dist - 3.0).abs() < 1e-12);
}

#[test]
fn separated_proposal_examples() {
    let r = pt(&[0.0, 0.0]);
    let agents = example3_points();
    let p = geometry::separated_proposal(&agents, &r).expect("r lies outside the hull");
    let m = Metric::Euclidean { dim: 2 };
    for v in &agents {
        assert!(geometry::approves(&Location::Coords(v.clone()), &Location::Coords(p.clone()), &loc(&[0.0, 0.0]), &m)
            .unwrap());
    }
    assert!((p.coords()[0]).abs() < 1e-6 && (p.coords()[1] - 3.0).abs() < 0.5, "{p:?}");

    assert!(geometry::separated_proposal(&[pt(&[-4.0, 0.0]), pt(&[4.0, 0.0])], &r).is_none());

    let v = pt(&[2.0, -1.0]);
    let p = geometry::separated_proposal(std::slice::from_ref(&v), &r).unwrap();
    assert!(geometry::euclidean(&v, &p) < geometry::euclidean(&v, &r));
}

#[test]
fn best_common_proposal_examples() {
    let r = pt(&[0.0, 0.0]);
    let tangent = geometry::best_common_proposal(&[pt(&[-4.0, 0.0]), pt(&[4.0, 0.0])], &r).unwrap();
    assert!(tangent.margin.abs() <= 1e-7, "{}", tangent.margin);
    assert!(geometry::euclidean(&tangent.witness, &r) < 1e-7);
    assert!(!tangent.is_feasible());

    let ex3 = geometry::best_common_proposal(&example3_points(), &r).unwrap();
    assert!(ex3.is_feasible());
    let bound = (3.0 - 18f64.sqrt()).max(3.0 - 13f64.sqrt());
    assert!(ex3.margin <= bound + 1e-9, "{} vs {bound}", ex3.margin);

    let v = pt(&[1.0, 2.0]);
    let single = geometry::best_common_proposal(std::slice::from_ref(&v), &r).unwrap();
    assert!((single.margin + 5f64.sqrt()).abs() < 1e-7);
    assert!(geometry::euclidean(&single.witness, &v) < 1e-6);
}

// ---- space ----

#[test]
fn approval_set_examples() {
    let ex1 = builtin_fixture("example1").unwrap().space;
    assert_eq!(approval_ids(&ex1, "v1"), names(&["a", "b"]));
    let at_r = euclid_space(&[("v", &[0.0])], Some(&[("a", &[1.0])]), &[0.0]);
    assert!(at_r.approval_set(0).unwrap().is_empty());
    let ex6 = builtin_fixture("example6").unwrap().space;
    assert_eq!(approval_ids(&ex6, "v9"), names(&["p", "e"]));
}

#[test]
fn supporters_examples() {
    let ex1 = builtin_fixture("example1").unwrap().space;
    let s = ex1.supporters(&set(&ex1, &["v1", "v2"]), &listed(&ex1, "a"));
    assert_eq!(ids(&ex1, &s), ["v1"]);
    assert!(ex1.supporters(&AgentSet::new(), &listed(&ex1, "a")).is_empty());
    let ex6 = builtin_fixture("example6").unwrap().space;
    let s = ex6.supporters(&ex6.all_agents(), &listed(&ex6, "p"));
    assert_eq!(ids(&ex6, &s), ["v5", "v6", "v7", "v8", "v9"]);
}

#[test]
fn max_support_examples() {
    let ex2 = builtin_fixture("example2").unwrap().space;
    let r = ex2.max_support().unwrap();
    assert_eq!(r.max_support, 7);
    assert_eq!(r.witnesses, vec![listed(&ex2, "a")]);

    // With e at (0,0,3.5), v5..v8 approve e as well, so e ties with p.
    let ex6 = builtin_fixture("example6").unwrap().space;
    let r = ex6.max_support().unwrap();
    assert_eq!(r.max_support, 5);
    assert!(r.witnesses.contains(&listed(&ex6, "p")));
    assert_eq!(r.witnesses, vec![listed(&ex6, "p"), listed(&ex6, "e")]);

    let lone = euclid_space(&[("v", &[0.0])], Some(&[("a", &[1.0])]), &[0.0]);
    assert_eq!(lone.max_support().unwrap().max_support, 0);
}

// ---- coalition ----

#[test]
fn validate_structure_examples() {
    let ex1 = builtin_fixture("example1").unwrap();
    assert!(ex1.initial.validate(&ex1.space).is_ok());
    let s = &ex1.space;

    let overlap = CoalitionStructure::new(vec![
        coalition(s, &["v1", "v2"], listed(s, "b")),
        coalition(s, &["v2", "v3"], listed(s, "b")),
    ]);
    let clauses: Vec<&str> = overlap.validate(s).unwrap_err().iter().map(|v| v.clause()).collect();
    assert!(clauses.contains(&"partition"), "{clauses:?}");

    let disapproving = CoalitionStructure::new(vec![
        coalition(s, &["v1", "v2"], listed(s, "a")),
        coalition(s, &["v3"], listed(s, "c")),
    ]);
    let clauses: Vec<&str> = disapproving.validate(s).unwrap_err().iter().map(|v| v.clause()).collect();
    assert_eq!(clauses, ["approval"]);
}

#[test]
fn potential_examples() {
    let grand: Structure = CoalitionStructure::new(vec![DeliberativeCoalition::new(0..10, Proposal::StatusQuo)]);
    assert_eq!(grand.potential(), 100);
    let singles: Structure =
        CoalitionStructure::new((0..5).map(|v| DeliberativeCoalition::new([v], Proposal::StatusQuo)).collect());
    assert_eq!(singles.potential(), 5);
    assert_eq!(builtin_fixture("example2").unwrap().initial.potential(), 34);
}

#[test]
fn signature_examples() {
    let ex2 = builtin_fixture("example2").unwrap().initial;
    assert_eq!(ex2.signature(), Signature(vec![4, 3, 3]));
    assert!(Signature(vec![4, 3, 3]).lex_less(&Signature(vec![5, 2, 2, 1])));
    assert!(Signature(vec![3, 3]).lex_less(&Signature(vec![3, 3, 1])));
    assert!(!Signature(vec![3, 3, 1]).lex_less(&Signature(vec![3, 3])));
}

#[test]
fn is_successful_examples() {
    let ex5 = builtin_fixture("example5").unwrap();
    let s = &ex5.space;
    let report = s.max_support().unwrap();
    let after = CoalitionStructure::new(vec![
        coalition(s, &["v5"], listed(s, "a")),
        coalition(s, &["v6"], listed(s, "b")),
        coalition(s, &["v1", "v2", "v3", "v4"], listed(s, "p")),
    ]);
    assert!(after.validate(s).is_ok());
    assert!(after.is_successful(s, &report));

    let ex6 = builtin_fixture("example6").unwrap();
    assert!(!ex6.initial.is_successful(&ex6.space, &ex6.space.max_support().unwrap()));

    let unanimous = euclid_space(&[("u", &[1.0]), ("w", &[2.0])], Some(&[("q", &[1.5])]), &[0.0]);
    let grand = CoalitionStructure::new(vec![DeliberativeCoalition::new([0, 1], listed(&unanimous, "q"))]);
    assert!(grand.is_successful(&unanimous, &unanimous.max_support().unwrap()));
}

// ---- transitions ----

/// d1 = ({v@0.6}, 0.5), d2 = ({u@1, w@1}, 1), r = 0.
fn line_pair() -> (Space, Structure) {
    let s = euclid_space(
        &[("v", &[0.6]), ("u", &[1.0]), ("w", &[1.0])],
        Some(&[("h", &[0.5]), ("one", &[1.0])]),
        &[0.0],
    );
    let d = CoalitionStructure::new(vec![coalition(&s, &["v"], listed(&s, "h")), coalition(&s, &["u", "w"], listed(&s, "one"))]);
    assert!(d.validate(&s).is_ok());
    (s, d)
}

#[test]
fn single_agent_examples() {
    let ex2 = builtin_fixture("example2").unwrap();
    assert!(transitions::enumerate_single_agent(&ex2.initial, &ex2.space).is_empty());

    let (s, d) = line_pair();
    let found = transitions::enumerate_single_agent(&d, &s);
    // u and w approve 0.5 but may not move into a smaller coalition.
    assert_eq!(found.len(), 1);
    assert_eq!(ids(&s, &found[0].movers[0]), ["v"]);
    assert_eq!(found[0].sources, [0, 1]);
}

#[test]
fn follow_examples() {
    let ex3 = builtin_fixture("example3").unwrap();
    assert!(transitions::enumerate_follow(&ex3.initial, &ex3.space).is_empty());

    let (s, d) = line_pair();
    let pairs: BTreeSet<[usize; 2]> = transitions::enumerate_follow(&d, &s).iter().map(|t| t.sources).collect();
    assert_eq!(pairs, BTreeSet::from([[0, 1], [1, 0]]));

    let twins = euclid_space(&[("a", &[2.0]), ("b", &[2.0])], Some(&[("x", &[2.0])]), &[0.0]);
    let d = CoalitionStructure::new(vec![
        coalition(&twins, &["a"], listed(&twins, "x")),
        coalition(&twins, &["b"], listed(&twins, "x")),
    ]);
    assert_eq!(transitions::enumerate_follow(&d, &twins).len(), 2);
}

#[test]
fn merge_examples() {
    let ex3 = builtin_fixture("example3").unwrap();
    let s = &ex3.space;
    let merges = transitions::enumerate_merge(&ex3.initial, s).unwrap();
    assert_eq!(merges.len(), 1);
    assert_eq!(merges[0].target, listed(s, "p"));
    assert_eq!(merges[0].new_coalition(&ex3.initial), s.all_agents());

    // The continuous variant synthesizes a proposal near (0,3) that all four approve.
    let cont = euclid_space(&[("v1", &[-3.0, 3.0]), ("v2", &[-3.0, 4.0]), ("v3", &[3.0, 3.0]), ("v4", &[3.0, 4.0])], None, &[0.0, 0.0]);
    let d = CoalitionStructure::new(vec![
        coalition(&cont, &["v1", "v2"], Proposal::Point(pt(&[-3.0, 3.0]))),
        coalition(&cont, &["v3", "v4"], Proposal::Point(pt(&[3.0, 3.0]))),
    ]);
    let merges = transitions::enumerate_merge(&d, &cont).unwrap();
    assert_eq!(merges.len(), 1);
    assert!(cont.all_approve(&cont.all_agents(), &merges[0].target));

    let ex4 = builtin_fixture("example4").unwrap();
    assert!(transitions::enumerate_merge(&ex4.initial, &ex4.space).unwrap().is_empty());
    let cont4 = euclid_space(
        &[("v1", &[-3.0, 3.0]), ("v2", &[-3.0, 4.0]), ("v3", &[3.0, 3.0]), ("v4", &[3.0, 4.0]), ("v5", &[-4.0, 0.0]), ("v6", &[4.0, 0.0])],
        None,
        &[0.0, 0.0],
    );
    let d = CoalitionStructure::new(vec![
        coalition(&cont4, &["v1", "v2", "v5"], Proposal::Point(pt(&[-3.0, 2.0]))),
        coalition(&cont4, &["v3", "v4", "v6"], Proposal::Point(pt(&[3.0, 2.0]))),
    ]);
    assert!(d.validate(&cont4).is_ok());
    assert!(transitions::enumerate_merge(&d, &cont4).unwrap().is_empty());

    // Follow at p2 implies a merge for the pair.
    let (s, d) = line_pair();
    assert!(!transitions::enumerate_merge(&d, &s).unwrap().is_empty());
}

/// d1 = ({a@3, b@9}, 5), d2 = ({w@w0}, w0), r = 0, plus extra listed proposals.
fn subsume_line(w0: f64, extra: &[(&str, &[f64])]) -> (Space, Structure) {
    let mut proposals: Vec<(&str, &[f64])> = vec![("five", &[5.0]), ("own", std::slice::from_ref(&w0))];
    proposals.extend_from_slice(extra);
    let s = euclid_space(&[("a", &[3.0]), ("b", &[9.0]), ("w", &[w0])], Some(&proposals), &[0.0]);
    let d = CoalitionStructure::new(vec![coalition(&s, &["a", "b"], listed(&s, "five")), coalition(&s, &["w"], listed(&s, "own"))]);
    assert!(d.validate(&s).is_ok());
    (s, d)
}

#[test]
fn compromise_examples() {
    let ex5 = builtin_fixture("example5").unwrap();
    let s = &ex5.space;
    let found = transitions::enumerate_compromise(&ex5.initial, s).unwrap();
    let t = found
        .iter()
        .find(|t| t.target == listed(s, "p"))
        .expect("compromise at p");
    assert_eq!(t.new_coalition(&ex5.initial), set(s, &["v1", "v2", "v3", "v4"]));
    let after = transitions::apply(&ex5.initial, t, s).unwrap();
    assert_eq!(sizes(&after), [4, 1, 1]);
    assert_eq!(ex5.initial.potential(), 18);
    assert_eq!(after.potential(), 18);

    let ex6 = builtin_fixture("example6").unwrap();
    assert!(transitions::enumerate_compromise(&ex6.initial, &ex6.space).unwrap().is_empty());

    // At 4 only a and b gather: 2 = |C1| is not enough.
    let (s, d) = subsume_line(-1.0, &[("four", &[4.0])]);
    assert!(transitions::enumerate_compromise(&d, &s).unwrap().is_empty());
}

#[test]
fn subsume_examples() {
    let (s, d) = subsume_line(1.0, &[("mid", &[1.5])]);
    let found = transitions::enumerate_subsume(&d, &s).unwrap();
    let t = found.iter().find(|t| t.target == listed(&s, "mid")).expect("subsume at 1.5");
    assert_eq!(t.sources, [0, 1]);
    assert_eq!(ids(&s, &t.movers[0]), ["a", "b"]);
    assert_eq!(ids(&s, &t.movers[1]), ["w"]);
    let after = transitions::apply(&d, t, &s).unwrap();
    assert_eq!(sizes(&after), [3]);

    // The continuous version synthesizes its own target.
    let cont = euclid_space(&[("a", &[3.0]), ("b", &[9.0]), ("w", &[1.0])], None, &[0.0]);
    let d = CoalitionStructure::new(vec![
        coalition(&cont, &["a", "b"], Proposal::Point(pt(&[5.0]))),
        coalition(&cont, &["w"], Proposal::Point(pt(&[1.0]))),
    ]);
    // Both orderings qualify: either coalition can be the one moving whole.
    let found = transitions::enumerate_subsume(&d, &cont).unwrap();
    let orders: BTreeSet<[usize; 2]> = found.iter().map(|t| t.sources).collect();
    assert_eq!(orders, BTreeSet::from([[0, 1], [1, 0]]));
    assert!(found.iter().all(|t| t.new_coalition(&d) == cont.all_agents()));

    let ex5 = builtin_fixture("example5").unwrap();
    let s = &ex5.space;
    let four = set(s, &["v1", "v2", "v3", "v4"]);
    let subsumes = transitions::enumerate_subsume(&ex5.initial, s).unwrap();
    assert!(subsumes.iter().all(|t| t.new_coalition(&ex5.initial) != four));
    let compromises = transitions::enumerate_compromise(&ex5.initial, s).unwrap();
    assert!(subsumes.iter().all(|t| compromises.contains(t)));
}

#[test]
fn apply_potential_deltas() {
    let (s, d) = line_pair();
    let follow = transitions::enumerate_follow(&d, &s);
    // Sizes 1 and 2: 2xy = 4.
    for t in &follow {
        let after = transitions::apply(&d, t, &s).unwrap();
        assert_eq!(after.potential(), d.potential() + 4);
    }
    let single = &transitions::enumerate_single_agent(&d, &s)[0];
    let after = transitions::apply(&d, single, &s).unwrap();
    // x = 1, y = 2: 2(y − x) + 2 = 4.
    assert_eq!(after.potential(), d.potential() + 4);
}

// ---- engine ----

#[test]
fn run_examples() {
    let ex2 = builtin_fixture("example2").unwrap();
    let policy = Policy::parse("single_agent", Selector::UniformRandom, 1).unwrap();
    let trace = engine::run(&ex2.space, &ex2.initial, &policy, 100).unwrap();
    assert!(trace.is_empty());
    assert_eq!(trace.classification, Classification::Unsuccessful);

    let ex5 = builtin_fixture("example5").unwrap();
    for seed in 0..20 {
        let policy = Policy::parse("compromise", Selector::UniformRandom, seed).unwrap();
        let trace = engine::run(&ex5.space, &ex5.initial, &policy, 100).unwrap();
        assert_eq!(trace.classification, Classification::Successful, "seed {seed}");
    }

    let lone = euclid_space(&[("v", &[1.0])], Some(&[("a", &[1.0])]), &[0.0]);
    let d0 = CoalitionStructure::new(vec![DeliberativeCoalition::new([0], listed(&lone, "a"))]);
    let all = Policy::parse("single_agent,follow,merge,compromise,subsume", Selector::FirstEnumerated, 0).unwrap();
    let trace = engine::run(&lone, &d0, &all, 10).unwrap();
    assert!(trace.is_empty());
    assert_eq!(trace.classification, Classification::Successful);
}

#[test]
fn default_initial_structure_examples() {
    let ex2 = builtin_fixture("example2").unwrap().space;
    let d = engine::default_initial_structure(&ex2);
    assert_eq!(d.len(), 10);
    let mut at = std::collections::BTreeMap::new();
    for c in &d.coalitions {
        assert_eq!(c.size(), 1);
        *at.entry(ex2.proposal_label(&c.proposal)).or_insert(0) += 1;
    }
    assert_eq!(at, [("a".to_string(), 3), ("b".to_string(), 4), ("c".to_string(), 3)].into());

    let all_at_r = euclid_space(&[("u", &[0.0, 0.0]), ("w", &[0.0, 0.0])], Some(&[("x", &[1.0, 0.0])]), &[0.0, 0.0]);
    let d = engine::default_initial_structure(&all_at_r);
    assert_eq!(d.len(), 1);
    assert!(d.coalitions[0].supports_status_quo());
    assert_eq!(d.coalitions[0].size(), 2);

    let cont = euclid_space(&[("v", &[1.0, 1.0])], None, &[0.0, 0.0]);
    let d = engine::default_initial_structure(&cont);
    assert_eq!(d.coalitions, vec![DeliberativeCoalition::new([0], Proposal::Point(pt(&[1.0, 1.0])))]);
}

#[test]
fn batch_examples() {
    let line = GeneratorConfig::preset("line").unwrap();
    let policy = Policy::parse("follow,single_agent", Selector::UniformRandom, 0).unwrap();
    let rows = engine::batch(&line, std::slice::from_ref(&policy), 1..=100).unwrap();
    let stats = engine::aggregate(&rows);
    assert_eq!(stats[0].runs, 100);
    assert_eq!(stats[0].success_rate(), 1.0);

    let plane = GeneratorConfig { dims: vec![2], ..GeneratorConfig::preset("continuous").unwrap() };
    let compromise = Policy::parse("compromise", Selector::UniformRandom, 0).unwrap();
    let rows = engine::batch(&plane, &[compromise], 1..=100).unwrap();
    assert!(rows.iter().all(|r| r.d == 2 && r.x_size.is_none()));
    assert_eq!(engine::aggregate(&rows)[0].success_rate(), 1.0);

    let finite = GeneratorConfig::preset("finite").unwrap();
    let policies: Vec<Policy> = ["merge", "single_agent,follow,merge"]
        .iter()
        .map(|p| Policy::parse(p, Selector::UniformRandom, 0).unwrap())
        .collect();
    for row in engine::batch(&finite, &policies, 1..=50).unwrap() {
        assert!(row.steps <= row.n * row.n, "{row:?}");
    }
}

// ---- oracle ----

#[test]
fn naive_max_support_examples() {
    let ex2 = builtin_fixture("example2").unwrap().space;
    let r = oracle::naive_max_support(&ex2).unwrap();
    assert_eq!((r.max_support, r.witnesses), (7, vec![listed(&ex2, "a")]));
    let ex3 = builtin_fixture("example3").unwrap().space;
    let r = oracle::naive_max_support(&ex3).unwrap();
    assert_eq!((r.max_support, r.witnesses), (4, vec![listed(&ex3, "p")]));
    let empty = euclid_space(&[("u", &[1.0]), ("w", &[-1.0])], Some(&[("x", &[5.0])]), &[0.0]);
    assert_eq!(oracle::naive_max_support(&empty).unwrap().max_support, 0);
}

#[test]
fn explore_examples() {
    let kinds = [TransitionKind::SingleAgent, TransitionKind::Follow];
    let ex2 = builtin_fixture("example2").unwrap();
    let caps = ExploreCaps { max_agents: 10, ..ExploreCaps::default() };
    let r = oracle::explore(&ex2.space, &ex2.initial, &[TransitionKind::SingleAgent], caps, true).unwrap();
    assert_eq!((r.states, r.terminals.len(), r.unsuccessful_terminals), (1, 1, 1));
    assert_eq!(r.terminals[0].canonical_key(), ex2.initial.canonical_key());
    assert_eq!(r.unsuccessful_path.as_ref().map(Vec::len), Some(0));
    // The agents at b approve a (4 < 5), so the coalition at b can follow to a;
    // on the line every terminal is then successful.
    let r = oracle::explore(&ex2.space, &ex2.initial, &kinds, caps, true).unwrap();
    assert!(r.states > 1);
    assert!(r.all_terminals_successful() && !r.terminals.is_empty());
    assert_eq!(r.equivalence_mismatches, Some(0));

    let ex3 = builtin_fixture("example3").unwrap();
    let r = oracle::explore(&ex3.space, &ex3.initial, &kinds, ExploreCaps::default(), true).unwrap();
    assert!(r.successful_terminals == 0 && r.unsuccessful_terminals == r.terminals.len());
    assert_eq!(r.equivalence_mismatches, Some(0));

    let lone = euclid_space(&[("v", &[2.0])], Some(&[("a", &[2.0])]), &[0.0]);
    let d0 = engine::default_initial_structure(&lone);
    let r = oracle::explore(&lone, &d0, &TransitionKind::ALL, ExploreCaps::default(), true).unwrap();
    assert_eq!((r.terminals.len(), r.successful_terminals), (1, 1));
}

// ---- scenario_io ----

#[test]
fn load_scenario_examples() {
    let ex2 = builtin_fixture("example2").unwrap();
    assert_eq!(ex2.space.n_agents(), 10);
    let xs: Vec<&str> = ex2.space.listed().iter().map(|p| p.id.as_str()).collect();
    assert_eq!(xs, ["a", "b", "c"]);
    let initial: Vec<usize> = ex2.initial.coalitions.iter().map(|c| c.size()).collect();
    assert_eq!(initial, [3, 4, 3]);

    let mut bad: serde_json::Value = serde_json::from_str(scenario_io::fixture_source("example1").unwrap()).unwrap();
    bad["space"]["matrix"][0][1] = serde_json::json!(3);
    let err = scenario_io::load_scenario(&bad.to_string()).unwrap_err();
    assert_eq!(err.code(), "metric.symmetry");

    let ex6 = builtin_fixture("example6").unwrap();
    assert_eq!(ex6.initial.len(), 5);
}

#[test]
fn builtin_fixture_examples() {
    let ex3 = builtin_fixture("example3").unwrap().space;
    let ex4 = builtin_fixture("example4").unwrap();
    let s4 = &ex4.space;
    assert_eq!(s4.agent_point(agent(s4, "v5")), Some(&pt(&[-4.0, 0.0])));
    assert_eq!(s4.agent_point(agent(s4, "v6")), Some(&pt(&[4.0, 0.0])));
    for id in ["v1", "v2", "v3", "v4"] {
        assert_eq!(s4.agent_point(agent(s4, id)), ex3.agent_point(agent(&ex3, id)));
    }
    let d1 = ex4.initial.coalitions.iter().find(|c| c.members.contains(&agent(s4, "v1"))).unwrap();
    assert!(d1.members.contains(&agent(s4, "v5")));
    let d2 = ex4.initial.coalitions.iter().find(|c| c.members.contains(&agent(s4, "v3"))).unwrap();
    assert!(d2.members.contains(&agent(s4, "v6")));

    assert_eq!(ex3.status_quo_point(), Some(&pt(&[0.0, 0.0])));
    let coords = |id: &str| match &ex3.listed()[ex3.proposal_index(id).unwrap()].location {
        Location::Coords(p) => p.clone(),
        other => panic!("{other:?}"),
    };
    assert_eq!(coords("p"), pt(&[0.0, 3.0]));
    assert_eq!(coords("a"), pt(&[-3.0, 3.0]));
    assert_eq!(coords("b"), pt(&[3.0, 3.0]));

    for name in ["example1", "example1_euclidean"] {
        let s = builtin_fixture(name).unwrap().space;
        assert_eq!(approval_ids(&s, "v1"), names(&["a", "b"]), "{name}");
        assert_eq!(approval_ids(&s, "v2"), names(&["b", "c"]), "{name}");
        assert_eq!(approval_ids(&s, "v3"), names(&["b", "c", "d"]), "{name}");
    }
    assert!(builtin_fixture("example7").is_err());
}

#[test]
fn write_trace_examples() {
    let ex2 = builtin_fixture("example2").unwrap();
    let policy = Policy::parse("single_agent", Selector::UniformRandom, 1).unwrap();
    let trace = engine::run(&ex2.space, &ex2.initial, &policy, 10).unwrap();
    let file = scenario_io::read_trace(&scenario_io::write_trace(Some("example2"), &ex2.space, &trace)).unwrap();
    assert!(file.steps.is_empty());
    assert_eq!(file.classification, Classification::Unsuccessful);

    let ex5 = builtin_fixture("example5").unwrap();
    let policy = Policy::parse("compromise", Selector::FirstEnumerated, 0).unwrap();
    let trace = engine::run(&ex5.space, &ex5.initial, &policy, 10).unwrap();
    let file = scenario_io::read_trace(&scenario_io::write_trace(Some("example5"), &ex5.space, &trace)).unwrap();
    assert_eq!(file.steps.len(), 1);
    assert_eq!(file.steps[0].kind, TransitionKind::Compromise);
    let mut movers: Vec<String> = file.steps[0].movers.concat();
    movers.sort();
    assert_eq!(movers, ["v1", "v2", "v3", "v4"]);

    let small = GeneratorConfig::preset("small").unwrap();
    let rows = engine::batch(&small, &[Policy::parse("merge", Selector::UniformRandom, 0).unwrap()], 1..=3).unwrap();
    let csv = scenario_io::write_summary(&rows);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], scenario_io::SUMMARY_HEADER);
}

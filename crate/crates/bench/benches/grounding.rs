//! Grounding and inference throughput as the individual pool grows.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use schemanet::ground::{ground, NodeId};
use schemanet::infer::{posterior, Evidence};
use schemanet::model::{ident, KnowledgeBase, TypeDecl};
use schemanet::parser::{parse_ground_atom, parse_kb};

const ALARM_KB: &str = "
p(fire) = 0.01.
schema fire -> smells_smoke(X).
p(smells_smoke(X) | fire) = 0.9.
p(smells_smoke(X) | ~fire) = 0.01.
schema smells_smoke(X) -> sets_off_alarm(X).
p(sets_off_alarm(X) | smells_smoke(X)) = 0.7.
p(sets_off_alarm(X) | ~smells_smoke(X)) = 0.001.
schema exists X in person . sets_off_alarm(X) -> alarm_sounds.
p(alarm_sounds | exists X in person . sets_off_alarm(X)) = 0.99.
p(alarm_sounds | ~exists X in person . sets_off_alarm(X)) = 0.001.
schema alarm_sounds -> leaves_building(X).
p(leaves_building(X) | alarm_sounds) = 0.9.
p(leaves_building(X) | ~alarm_sounds) = 0.05.
type person = { }.
";

fn alarm_kb(people: usize) -> KnowledgeBase {
    let mut kb = parse_kb(ALARM_KB).unwrap();
    let person = ident("person");
    let decl = kb.types.iter_mut().find(|t| t.name == person).unwrap();
    *decl = TypeDecl {
        name: person,
        members: (0..people).map(|i| ident(&format!("p{i}"))).collect(),
    };
    kb
}

fn bench_ground(c: &mut Criterion) {
    let mut group = c.benchmark_group("ground");
    // the existential node's table is dense in its parent count, so sizes
    // stay well below 2^20 rows
    for people in [2usize, 8, 16] {
        let kb = alarm_kb(people);
        group.bench_with_input(BenchmarkId::from_parameter(people), &kb, |b, kb| {
            b.iter(|| ground(kb).unwrap())
        });
    }
    group.finish();
}

fn bench_posterior(c: &mut Criterion) {
    let mut group = c.benchmark_group("posterior");
    for people in [2usize, 8, 16] {
        let net = ground(&alarm_kb(people)).unwrap();
        let query = NodeId::Atom(parse_ground_atom("fire").unwrap());
        let mut ev = Evidence::new();
        ev.insert(NodeId::Atom(parse_ground_atom("leaves_building(p0)").unwrap()), true);
        group.bench_with_input(BenchmarkId::from_parameter(people), &net, |b, net| {
            b.iter(|| posterior(net, &query, &ev).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_ground, bench_posterior);
criterion_main!(benches);

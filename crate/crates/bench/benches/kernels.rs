use criterion::{black_box, criterion_group, criterion_main, Criterion};
use locus_core::codealg::{rref, Field};
use locus_core::gf::{FieldElement, FieldParams};
use locus_core::linecode::{encode, mk_params, rldc_decode, DecodeConfig, Poly};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gf_mul(c: &mut Criterion) {
    for t in [8u32, 16, 32] {
        let f = FieldParams::new(t, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mask = (1u64 << t) - 1;
        let pairs: Vec<(FieldElement, FieldElement)> = (0..1024)
            .map(|_| (FieldElement(rng.gen::<u64>() & mask), FieldElement(rng.gen::<u64>() & mask)))
            .collect();
        c.bench_function(&format!("gf_mul/t={t}"), |b| {
            b.iter(|| pairs.iter().fold(FieldElement::ZERO, |acc, &(x, y)| f.add(acc, f.mul(x, y))))
        });
    }
}

fn rref_bench(c: &mut Criterion) {
    for (field, name) in [(Field::f2(), "F2"), (Field::prime(3).unwrap(), "F3"), (Field::binary(4).unwrap(), "GF16")] {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<u32>> = (0..32).map(|_| field.random_vector(32, &mut rng)).collect();
        c.bench_function(&format!("rref/32x32/{name}"), |b| b.iter(|| rref(&field, black_box(rows.clone()), 32)));
    }
}

fn poly_eval(c: &mut Criterion) {
    let p = mk_params(4, 3, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = Poly::random(&p, &mut rng);
    let pts: Vec<u64> = (0..256).map(|_| rng.gen_range(0..p.point_count())).collect();
    c.bench_function("poly_eval/t=4,n=3,d=4", |b| {
        b.iter(|| pts.iter().fold(FieldElement::ZERO, |acc, &x| p.field().add(acc, f.eval(&p, x))))
    });
}

fn decode(c: &mut Criterion) {
    let p = mk_params(4, 2, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = Poly::random(&p, &mut rng);
    let word = encode(&p, &f);
    let cfg = DecodeConfig::default();
    c.bench_function("rldc_decode/t=4,n=2,d=2", |b| {
        b.iter(|| {
            let x = rng.gen_range(0..p.point_count());
            rldc_decode(&p, &word, x, FieldElement(1), 0, cfg, &mut rng).unwrap()
        })
    });
}

criterion_group!(benches, gf_mul, rref_bench, poly_eval, decode);
criterion_main!(benches);

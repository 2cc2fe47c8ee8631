//! Exact invariants of the estimation engine: results are independent of the
//! thread count and of how the prime range is windowed, counting estimates
//! are additive over set operations, and finite exceptions move a count by
//! exactly their size.

use frobdens::density::SetExpr;
use frobdens::estimate::{
    delta_x_counting, estimate_both, EstimateJob, PrimeSource, Schedule,
};
use frobdens::fields::{stream, FieldPair, NormalPart, PairKind, PrimeRecord};
use frobdens::poly::IntPoly;
use frobdens::primes::{for_each_prime, PrimeWindow};
use proptest::prelude::*;

fn tower15() -> FieldPair {
    FieldPair::abelian(15, &[11], &[]).unwrap()
}

fn residue_index(pair: &FieldPair, r: u64) -> usize {
    match pair.kind() {
        PairKind::Abelian(t) => t.base.elem_of_residue(r).unwrap(),
        _ => unreachable!("abelian scenario"),
    }
}

#[test]
fn thread_count_never_changes_a_bit() {
    let pair = tower15();
    let x = residue_index(&pair, 2);
    let job = EstimateJob::new(&pair, &SetExpr::congruence(15, &[2]), x).unwrap();
    let schedule = Schedule::scaled_to(1_000_000).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_both(&job, &schedule, &PrimeSource::Sieve).unwrap())
    };
    let (w1, c1) = run(1);
    let (w4, c4) = run(4);
    assert_eq!(c1.value.to_bits(), c4.value.to_bits());
    assert_eq!((c1.numer_count, c1.denom_count), (c4.numer_count, c4.denom_count));
    assert_eq!(w1.len(), w4.len());
    for (a, b) in w1.iter().zip(&w4) {
        assert_eq!(a.numer_sum.to_bits(), b.numer_sum.to_bits());
        assert_eq!(a.denom_sum.to_bits(), b.denom_sum.to_bits());
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!((a.numer_count, a.denom_count), (b.numer_count, b.denom_count));
    }
}

#[test]
fn finite_exceptions_move_the_count_by_their_size() {
    let pair = tower15();
    let x = residue_index(&pair, 2);
    let inner = SetExpr::congruence(15, &[2]);
    // the first 100 primes of the set, so every exception really is removed
    let mut removed = Vec::with_capacity(100);
    for_each_prime(2, 100_000, |p| {
        if removed.len() < 100 && p % 15 == 2 {
            removed.push(p);
        }
    })
    .unwrap();
    assert_eq!(removed.len(), 100);
    let thinned = SetExpr::MinusFinite {
        inner: Box::new(inner.clone()),
        primes: removed,
    };
    let full = delta_x_counting(
        &EstimateJob::new(&pair, &inner, x).unwrap(),
        10_000_000,
        &PrimeSource::Sieve,
    )
    .unwrap();
    let less = delta_x_counting(
        &EstimateJob::new(&pair, &thinned, x).unwrap(),
        10_000_000,
        &PrimeSource::Sieve,
    )
    .unwrap();
    assert_eq!(less.denom_count, full.denom_count);
    assert_eq!(less.numer_count, full.numer_count - 100);
    let bound = 100.0 / full.denom_count as f64;
    assert!((full.value - less.value).abs() <= bound * (1.0 + 1e-12));
}

#[test]
fn windowed_streams_concatenate_to_the_full_stream() {
    // abelian level, windows cut at the segment boundaries
    let pair = FieldPair::abelian(12, &[], &[]).unwrap();
    let full = stream(pair.top(), PrimeWindow::new(2, 5_000_000).unwrap());
    let mut pieces: Vec<PrimeRecord> = Vec::with_capacity(full.len());
    for w in PrimeWindow::new(2, 5_000_000).unwrap().aligned_chunks() {
        pieces.extend(stream(pair.top(), w));
    }
    assert_eq!(full, pieces);

    // splitting-field level, windows cut at an arbitrary prime boundary
    let f = IntPoly::monic_from_i64(&[-2, 0, 0, 1]).unwrap();
    let cubic = FieldPair::splitting(f, NormalPart::Alternating).unwrap();
    let hi = 300_000u64;
    let full = stream(cubic.top(), PrimeWindow::new(2, hi).unwrap());
    let cut = 149_993u64; // prime, so the boundary prime must land in the left piece
    let mut pieces = stream(cubic.top(), PrimeWindow::new(2, cut).unwrap());
    pieces.extend(stream(cubic.top(), PrimeWindow::new(cut + 1, hi).unwrap()));
    assert_eq!(full, pieces);
    assert!(pieces.iter().any(|r| r.p == cut));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // #(S) + #(T) = #(S union T) + #(S intersect T), prime by prime, so the
    // counting numerators must satisfy the same identity exactly.
    #[test]
    fn counting_is_additive_over_unions(mask_s in 0u8..=255, mask_t in 0u8..=255) {
        let units = [1u64, 2, 4, 7, 8, 11, 13, 14];
        let pick = |mask: u8| -> Vec<u64> {
            units
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &r)| r)
                .collect()
        };
        let s = SetExpr::congruence(15, &pick(mask_s));
        let t = SetExpr::congruence(15, &pick(mask_t));
        let union = SetExpr::Union(Box::new(s.clone()), Box::new(t.clone()));
        let inter = SetExpr::Intersect(Box::new(s.clone()), Box::new(t.clone()));
        let pair = tower15();
        let x = residue_index(&pair, 2);
        let count = |set: &SetExpr| -> u64 {
            let job = EstimateJob::new(&pair, set, x).unwrap();
            delta_x_counting(&job, 10_000, &PrimeSource::Sieve)
                .unwrap()
                .numer_count
        };
        prop_assert_eq!(count(&s) + count(&t), count(&union) + count(&inter));
    }

    // the whole space estimates to exactly 1 whatever the schedule looks like
    #[test]
    fn full_set_is_exactly_one_on_any_schedule(
        raw in proptest::collection::vec((1u64..40, 1u32..50), 1..5),
    ) {
        let mut x_acc = 1u64;
        let mut entries = Vec::with_capacity(raw.len());
        for (i, (dx, de)) in raw.iter().enumerate() {
            x_acc += dx * 100;
            let eps = 0.3 / (i as f64 + *de as f64 / 10.0 + 1.0);
            entries.push((eps, x_acc));
        }
        // keep epsilons strictly decreasing
        for i in 1..entries.len() {
            if entries[i].0 >= entries[i - 1].0 {
                entries[i].0 = entries[i - 1].0 * 0.9;
            }
        }
        let schedule = Schedule::new(entries).unwrap();
        let pair = tower15();
        let x = residue_index(&pair, 2);
        let job = EstimateJob::new(&pair, &SetExpr::All, x).unwrap();
        let (weighted, counting) =
            estimate_both(&job, &schedule, &PrimeSource::Sieve).unwrap();
        prop_assert_eq!(counting.value.to_bits(), 1f64.to_bits());
        for w in weighted {
            prop_assert_eq!(w.value.to_bits(), 1f64.to_bits());
        }
    }
}

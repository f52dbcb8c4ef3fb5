use nlclaw::field::{
    decode_snapshot, distance_l1, encode_snapshot, mass, norm_l1, norm_linf, total_variation, Field, Grid,
};
use proptest::prelude::*;

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, n)
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn norms_are_shift_invariant(v in values(48), s in 0isize..48) {
        let g = Grid::line(48, 2.0).unwrap();
        let f = Field::new(g, v).unwrap();
        let t = f.shifted(0, s);
        prop_assert!(rel_close(mass(&f).unwrap(), mass(&t).unwrap()));
        prop_assert!(rel_close(norm_l1(&f).unwrap(), norm_l1(&t).unwrap()));
        prop_assert_eq!(norm_linf(&f).unwrap(), norm_linf(&t).unwrap());
        prop_assert!(rel_close(total_variation(&f).unwrap(), total_variation(&t).unwrap()));
    }

    #[test]
    fn norms_are_shift_invariant_in_2d(v in values(144), s in -12isize..12, axis in 0usize..2) {
        let g = Grid::new(2, 12, 1.0).unwrap();
        let f = Field::new(g, v).unwrap();
        let t = f.shifted(axis, s);
        prop_assert!(rel_close(mass(&f).unwrap(), mass(&t).unwrap()));
        prop_assert!(rel_close(total_variation(&f).unwrap(), total_variation(&t).unwrap()));
    }

    #[test]
    fn tv_triangle_inequality(a in values(40), b in values(40)) {
        let g = Grid::line(40, 1.0).unwrap();
        let (f, h) = (Field::new(g, a).unwrap(), Field::new(g, b).unwrap());
        let sum = f.lincomb(1.0, &h, 1.0).unwrap();
        let lhs = total_variation(&sum).unwrap();
        let rhs = total_variation(&f).unwrap() + total_variation(&h).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-14));
    }

    #[test]
    fn distance_zero_iff_identical(a in values(32), i in 0usize..32, bump in prop::sample::select(vec![0.0, 1e-300, 1e-8, 3.0])) {
        let g = Grid::line(32, 1.0).unwrap();
        let f = Field::new(g, a.clone()).unwrap();
        let mut b = a;
        b[i] += bump;
        let h = Field::new(g, b).unwrap();
        let d = distance_l1(&f, &h).unwrap();
        prop_assert_eq!(d == 0.0, f.values() == h.values());
    }

    #[test]
    fn snapshot_round_trip(v in values(64), dim in 1usize..3) {
        let n = if dim == 1 { 64 } else { 8 };
        let g = Grid::new(dim, n, 1.5).unwrap();
        let bytes = encode_snapshot(&g, &v);
        let (g2, v2) = decode_snapshot(&bytes).unwrap();
        prop_assert_eq!(g, g2);
        prop_assert_eq!(v, v2);
    }
}

#[test]
fn negative_zero_does_not_count_as_a_difference() {
    let g = Grid::line(8, 1.0).unwrap();
    let mut v: Vec<f64> = (0..8).map(f64::from).collect();
    let a = Field::new(g, v.clone()).unwrap();
    v[0] = -0.0;
    let b = Field::new(g, v).unwrap();
    assert_eq!(distance_l1(&a, &b).unwrap(), 0.0);
}

#[test]
fn aligned_step_tv_is_exact_under_refinement() {
    for n in [8, 16, 32, 64, 128] {
        let g = Grid::line(n, 1.0).unwrap();
        let f = Field::from_cell_averages(g, |x| if x[0] < 0.0 { 1.5 } else { -0.5 }).unwrap();
        assert!((total_variation(&f).unwrap() - 4.0).abs() < 1e-13, "n = {n}");
    }
}

#[test]
fn smooth_tv_converges_under_refinement() {
    let exact = 4.0 * 0.7;
    let mut prev = f64::INFINITY;
    for n in [16, 32, 64, 128, 256] {
        let g = Grid::line(n, 1.0).unwrap();
        let f = Field::from_cell_averages(g, |x| 0.7 * (2.0 * std::f64::consts::PI * x[0]).sin()).unwrap();
        let err = (total_variation(&f).unwrap() - exact).abs();
        assert!(err <= prev + 1e-15, "n = {n}");
        prev = err;
    }
    assert!(prev < 1e-3);
}

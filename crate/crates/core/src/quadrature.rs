//! Quadrature rules on the reference triangle `{(x, y): x, y >= 0, x + y <= 1}`
//! and on the reference segment `[0, 1]`.

use crate::Point;

/// Symmetric triangle rule. Points are barycentric coordinates; weights sum
/// to the reference area 1/2.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Highest total polynomial degree integrated exactly.
    pub degree: usize,
}

impl TriangleRule {
    /// One-point centroid rule, exact for degree 1.
    pub fn centroid() -> Self {
        Self {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![0.5],
            degree: 1,
        }
    }

    /// 6-point Dunavant rule, exact for degree 4.
    pub fn degree4() -> Self {
        let mut r = Self::empty(4);
        r.orbit3(0.445_948_490_915_964_886, 0.223_381_589_678_011_466);
        r.orbit3(0.091_576_213_509_770_743, 0.109_951_743_655_321_868);
        r
    }

    /// 12-point Dunavant rule, exact for degree 6.
    pub fn degree6() -> Self {
        let mut r = Self::empty(6);
        r.orbit3(0.249_286_745_170_910_421, 0.116_786_275_726_379_366);
        r.orbit3(0.063_089_014_491_502_228, 0.050_844_906_370_206_817);
        r.orbit6(
            0.053_145_049_844_816_947,
            0.310_352_451_033_784_405,
            0.082_851_075_618_373_575,
        );
        r
    }

    fn empty(degree: usize) -> Self {
        Self {
            points: Vec::new(),
            weights: Vec::new(),
            degree,
        }
    }

    // weights below are fractions of the triangle area
    fn orbit3(&mut self, a: f64, w: f64) {
        let b = 1.0 - 2.0 * a;
        for p in [[a, a, b], [a, b, a], [b, a, a]] {
            self.points.push(p);
            self.weights.push(0.5 * w);
        }
    }

    fn orbit6(&mut self, a: f64, b: f64, w: f64) {
        let c = 1.0 - a - b;
        for p in [
            [a, b, c],
            [a, c, b],
            [b, a, c],
            [b, c, a],
            [c, a, b],
            [c, b, a],
        ] {
            self.points.push(p);
            self.weights.push(0.5 * w);
        }
    }

    /// Physical points and weights on `tri`, weights summing to its area.
    pub fn on(&self, tri: &[Point; 3]) -> impl Iterator<Item = (Point, [f64; 3], f64)> + '_ {
        let area = crate::mesh::signed_area(tri).abs();
        let tri = *tri;
        self.points.iter().zip(&self.weights).map(move |(l, &w)| {
            let x = l[0] * tri[0][0] + l[1] * tri[1][0] + l[2] * tri[2][0];
            let y = l[0] * tri[0][1] + l[1] * tri[1][1] + l[2] * tri[2][1];
            ([x, y], *l, 2.0 * area * w)
        })
    }

    /// Integral of `f` over `tri`.
    pub fn integrate(&self, tri: &[Point; 3], f: impl Fn(Point) -> f64) -> f64 {
        self.on(tri).map(|(p, _, w)| w * f(p)).sum()
    }
}

/// Gauss-Legendre rule on `[0, 1]`; weights sum to 1.
#[derive(Debug, Clone)]
pub struct SegmentRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl SegmentRule {
    /// 3-point Gauss rule, exact for degree 5.
    pub fn gauss3() -> Self {
        let d = 0.5 * (0.6f64).sqrt();
        Self {
            points: vec![0.5 - d, 0.5, 0.5 + d],
            weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
            degree: 5,
        }
    }

    /// Points along `a -> b` as (point, parameter s in [0,1], weight scaled by length).
    pub fn on(&self, a: Point, b: Point) -> impl Iterator<Item = (Point, f64, f64)> + '_ {
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        self.points.iter().zip(&self.weights).map(move |(&s, &w)| {
            (
                [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])],
                s,
                w * len,
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    // ∫_ref x^i y^j = i! j! / (i + j + 2)!
    fn exact_monomial(i: u32, j: u32) -> f64 {
        factorial(i) * factorial(j) / factorial(i + j + 2)
    }

    fn check_exactness(rule: &TriangleRule) {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let sum: f64 = rule.weights.iter().sum();
        assert!((sum - 0.5).abs() < 1e-15);
        for i in 0..=rule.degree as u32 {
            for j in 0..=(rule.degree as u32 - i) {
                let q = rule.integrate(&tri, |p| p[0].powi(i as i32) * p[1].powi(j as i32));
                let e = exact_monomial(i, j);
                assert!(
                    (q - e).abs() < 1e-15,
                    "degree {} rule, x^{i} y^{j}: {q} vs {e}",
                    rule.degree
                );
            }
        }
    }

    #[test]
    fn triangle_rules_are_exact_to_their_degree() {
        check_exactness(&TriangleRule::centroid());
        check_exactness(&TriangleRule::degree4());
        check_exactness(&TriangleRule::degree6());
    }

    #[test]
    fn degree4_rule_is_not_exact_for_degree5() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let q = TriangleRule::degree4().integrate(&tri, |p| p[0].powi(5));
        assert!((q - exact_monomial(5, 0)).abs() > 1e-8);
    }

    #[test]
    fn segment_rule_is_exact_to_degree5() {
        let rule = SegmentRule::gauss3();
        for k in 0..=5 {
            let q: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(&s, &w)| w * s.powi(k))
                .sum();
            assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
        }
    }
}

//! Quadrature rules on the reference triangle and on edges.

/// Triangle rule in barycentric coordinates. Weights sum to one and are
/// scaled by the element area when used.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: u32,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::strang_fix_6()
    }
}

impl QuadratureRule {
    /// Symmetric six-point rule exact for polynomials of degree 4.
    pub fn strang_fix_6() -> Self {
        const A: f64 = 0.445_948_490_915_964_886_318_329_253_883;
        const WA: f64 = 0.223_381_589_678_011_465_944_827_307_725;
        const B: f64 = 0.091_576_213_509_770_743_459_571_463_402_2;
        const WB: f64 = 0.109_951_743_655_321_867_388_506_025_608;
        let ca = 1.0 - 2.0 * A;
        let cb = 1.0 - 2.0 * B;
        QuadratureRule {
            points: vec![
                [ca, A, A],
                [A, ca, A],
                [A, A, ca],
                [cb, B, B],
                [B, cb, B],
                [B, B, cb],
            ],
            weights: vec![WA, WA, WA, WB, WB, WB],
            degree: 4,
        }
    }

    /// Centroid rule, exact for linears.
    pub fn centroid() -> Self {
        QuadratureRule {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![1.0],
            degree: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// Three-point Gauss-Legendre rule on `[0, 1]` as `(parameter, weight)`.
pub fn gauss_edge_3() -> [(f64, f64); 3] {
    let d = 0.5 * (3.0f64 / 5.0).sqrt();
    [(0.5 - d, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + d, 5.0 / 18.0)]
}

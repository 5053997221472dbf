//! Symmetric quadrature rules on the reference triangle, in barycentric form.

use crate::scalar::Real;

/// Quadrature on a triangle with weights normalized to sum to one, so that the
/// physical weight of a point is `weight * area`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    pub points: Vec<[T; 3]>,
    pub weights: Vec<T>,
    /// Highest total polynomial degree integrated exactly.
    pub degree: usize,
}

impl<T: Real> QuadratureRule<T> {
    /// One-point centroid rule, degree 1.
    pub fn centroid() -> Self {
        let third = T::one() / T::lit(3.0);
        Self {
            points: vec![[third; 3]],
            weights: vec![T::one()],
            degree: 1,
        }
    }

    /// Three interior points at the permutations of (2/3, 1/6, 1/6), degree 2.
    pub fn interior_three_point() -> Self {
        let a = T::lit(2.0) / T::lit(3.0);
        let b = T::one() / T::lit(6.0);
        let w = T::one() / T::lit(3.0);
        Self {
            points: vec![[a, b, b], [b, a, b], [b, b, a]],
            weights: vec![w; 3],
            degree: 2,
        }
    }

    /// Six-point Dunavant rule, degree 4. Used for error integrals.
    pub fn six_point() -> Self {
        let (a1, b1, w1) = (0.445948490915965, 0.108103018168070, 0.223381589678011);
        let (a2, b2, w2) = (0.091576213509771, 0.816847572980459, 0.109951743655322);
        let p = |a: f64, b: f64, c: f64| [T::lit(a), T::lit(b), T::lit(c)];
        Self {
            points: vec![
                p(b1, a1, a1),
                p(a1, b1, a1),
                p(a1, a1, b1),
                p(b2, a2, a2),
                p(a2, b2, a2),
                p(a2, a2, b2),
            ],
            weights: [w1, w1, w1, w2, w2, w2]
                .iter()
                .map(|&w| T::lit(w))
                .collect(),
            degree: 4,
        }
    }

    /// Rule for a requested polynomial order (1, 2 or 4).
    pub fn of_order(order: usize) -> Option<Self> {
        match order {
            1 => Some(Self::centroid()),
            2 => Some(Self::interior_three_point()),
            3 | 4 => Some(Self::six_point()),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

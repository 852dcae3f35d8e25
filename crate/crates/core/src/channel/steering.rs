use ndarray::Array1;

use super::ChannelError;
use crate::scene::Point3;
use crate::C64;

/// Far-field response of a uniform planar array lying in its local x-y plane.
///
/// Element `(ix, iy)` sits at `(ix·d, iy·d, 0)` and is stored at index
/// `ix·ny + iy`. `direction` is a unit vector in the array's local frame.
pub fn steering_vector(
    side_counts: (usize, usize),
    spacing: f64,
    wavelength: f64,
    direction: Point3,
) -> Result<Array1<C64>, ChannelError> {
    if !(spacing > 0.0) || !(wavelength > 0.0) {
        return Err(ChannelError::BadSpacing);
    }
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(ChannelError::NotUnitDirection(norm));
    }
    let (nx, ny) = side_counts;
    let k = 2.0 * std::f64::consts::PI / wavelength;
    let mut out = Array1::zeros(nx * ny);
    for ix in 0..nx {
        for iy in 0..ny {
            let proj = spacing * (ix as f64 * direction[0] + iy as f64 * direction[1]);
            out[ix * ny + iy] = C64::from_polar(1.0, -k * proj);
        }
    }
    Ok(out)
}

/// Orientation of a planar array in world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayFrame {
    pub u: Point3,
    pub v: Point3,
    pub normal: Point3,
}

fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn unit(a: Point3) -> Point3 {
    let n = dot(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

impl ArrayFrame {
    /// Ceiling-mounted array facing the floor, rows along the cabin axis.
    pub fn downward() -> Self {
        Self {
            u: [1.0, 0.0, 0.0],
            v: [0.0, 1.0, 0.0],
            normal: [0.0, 0.0, -1.0],
        }
    }

    /// Vertical array with a horizontal `normal`; columns run vertically.
    pub fn vertical(normal: Point3) -> Self {
        let normal = unit(normal);
        let v = [0.0, 0.0, 1.0];
        let u = unit(cross(v, normal));
        Self { u, v, normal }
    }

    /// Expresses a world direction in the local frame.
    pub fn local(&self, world: Point3) -> Point3 {
        let l = [dot(world, self.u), dot(world, self.v), dot(world, self.normal)];
        // re-normalise to absorb rounding from the change of basis
        unit(l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAMBDA: f64 = 0.0107;

    #[test]
    fn broadside_is_all_ones() {
        let a = steering_vector((4, 3), LAMBDA / 2.0, LAMBDA, [0.0, 0.0, 1.0]).unwrap();
        assert_eq!(a.len(), 12);
        assert!(a.iter().all(|&c| c == C64::new(1.0, 0.0)));
    }

    #[test]
    fn endfire_two_element() {
        let a = steering_vector((2, 1), LAMBDA / 2.0, LAMBDA, [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(a[0], C64::new(1.0, 0.0));
        let expected = C64::from_polar(1.0, -std::f64::consts::PI);
        assert!((a[1] - expected).norm() < 1e-12);
    }

    #[test]
    fn rejects_non_unit_direction() {
        assert!(matches!(
            steering_vector((2, 2), 0.1, 1.0, [1.0, 1.0, 0.0]),
            Err(ChannelError::NotUnitDirection(_))
        ));
    }

    #[test]
    fn vertical_frame_is_orthonormal() {
        let f = ArrayFrame::vertical([0.6, -0.8, 0.0]);
        for (a, b) in [(f.u, f.v), (f.u, f.normal), (f.v, f.normal)] {
            assert!(dot(a, b).abs() < 1e-15);
        }
        for a in [f.u, f.v, f.normal] {
            assert!((dot(a, a) - 1.0).abs() < 1e-15);
        }
    }

    proptest::proptest! {
        #[test]
        fn entries_have_unit_modulus(theta in 0.0f64..std::f64::consts::PI, phi in 0.0f64..6.283, nx in 1usize..9, ny in 1usize..9) {
            let dir = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            let a = steering_vector((nx, ny), LAMBDA / 4.0, LAMBDA, dir).unwrap();
            for c in a.iter() {
                proptest::prop_assert!((c.norm() - 1.0).abs() <= 1e-12);
            }
        }
    }
}

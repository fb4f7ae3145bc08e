//! Amanatides-Woo integer grid traversal.

/// Axis-aligned cell lattice in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

impl Lattice {
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = ((x - self.origin_x) / self.resolution).floor();
        let fy = ((y - self.origin_y) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            None
        } else {
            Some((fx as usize, fy as usize))
        }
    }
}

/// Visits every cell a ray crosses, starting from the cell containing
/// `(x, y)`, in order of increasing distance, until `length` is exceeded,
/// the ray leaves the lattice, or `visit` returns `false`.
///
/// `visit` receives the cell and the distance along the ray at which the
/// ray entered it (0 for the start cell). Returns `false` if traversal was
/// stopped by `visit`.
pub fn traverse<F>(lat: &Lattice, x: f64, y: f64, angle: f64, length: f64, mut visit: F) -> bool
where
    F: FnMut(usize, usize, f64) -> bool,
{
    let Some((mut cx, mut cy)) = lat.cell_of(x, y) else {
        return true;
    };
    let (dx, dy) = (angle.cos(), angle.sin());
    let res = lat.resolution;
    let gx = (x - lat.origin_x) / res;
    let gy = (y - lat.origin_y) / res;

    let (step_x, mut t_max_x, t_delta_x) = axis_setup(gx, cx, dx, res);
    let (step_y, mut t_max_y, t_delta_y) = axis_setup(gy, cy, dy, res);

    let mut t_enter = 0.0;
    loop {
        if !visit(cx, cy, t_enter) {
            return false;
        }
        if t_max_x < t_max_y {
            if t_max_x > length {
                return true;
            }
            t_enter = t_max_x;
            t_max_x += t_delta_x;
            match step(cx, step_x, lat.width) {
                Some(n) => cx = n,
                None => return true,
            }
        } else {
            if t_max_y > length {
                return true;
            }
            t_enter = t_max_y;
            t_max_y += t_delta_y;
            match step(cy, step_y, lat.height) {
                Some(n) => cy = n,
                None => return true,
            }
        }
    }
}

fn axis_setup(g: f64, cell: usize, d: f64, res: f64) -> (i64, f64, f64) {
    if d > 0.0 {
        (1, ((cell as f64 + 1.0) - g) * res / d, res / d)
    } else if d < 0.0 {
        (-1, (g - cell as f64) * res / -d, res / -d)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

fn step(c: usize, s: i64, limit: usize) -> Option<usize> {
    let n = c as i64 + s;
    (n >= 0 && (n as usize) < limit).then_some(n as usize)
}

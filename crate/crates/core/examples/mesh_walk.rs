//! Walk a surface coordinate across patch boundaries on the ellipsoid.
//!
//! ```text
//! cargo run --example mesh_walk
//! ```

use nalgebra::Vector2;
use phong_fit::bench::make_ellipsoid;
use phong_fit::mesh::{walk, SurfaceCoordinate, DEFAULT_CROSSING_CAP};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = make_ellipsoid(320)?;
    let start = SurfaceCoordinate::new(0, 0.2, 0.3)?;
    println!("start  patch {:>3}  {:?}", start.patch, mesh.point_at(&start));
    for scale in [0.1, 0.5, 1.0, 2.0, 4.0] {
        let delta = Vector2::new(0.7, -0.4) * scale;
        let out = walk(&mesh, &start, delta, DEFAULT_CROSSING_CAP);
        let u = out.coordinate;
        println!(
            "|d| {:>5.2}  patch {:>3}  (v, w) = ({:.3}, {:.3})  crossings {:>2}  truncated {}",
            delta.norm(),
            u.patch,
            u.v,
            u.w,
            out.crossings,
            out.truncated()
        );
    }
    Ok(())
}

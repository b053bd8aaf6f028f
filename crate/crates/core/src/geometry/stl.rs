//! Binary STL export (little-endian, metres).

use std::io::{self, Write};

use nalgebra::{Point3, Vector3};

use super::solid::{face_corners, Face, Shape, Solid};

const CYLINDER_SEGMENTS: usize = 48;

/// Outward-oriented triangles of every primitive surface.
pub fn triangulate(solid: &Solid) -> Vec<[Point3<f64>; 3]> {
    let mut tris = Vec::new();
    for prim in &solid.primitives {
        match &prim.shape {
            Shape::Cylinder { radius, height } => {
                let ring = |z: f64| -> Vec<Point3<f64>> {
                    (0..CYLINDER_SEGMENTS)
                        .map(|i| {
                            let a = std::f64::consts::TAU * i as f64 / CYLINDER_SEGMENTS as f64;
                            prim.pose.transform_point(&Point3::new(radius * a.cos(), radius * a.sin(), z))
                        })
                        .collect()
                };
                let (lo, hi) = (ring(-height / 2.0), ring(height / 2.0));
                let c_lo = prim.pose.transform_point(&Point3::new(0.0, 0.0, -height / 2.0));
                let c_hi = prim.pose.transform_point(&Point3::new(0.0, 0.0, height / 2.0));
                for i in 0..CYLINDER_SEGMENTS {
                    let j = (i + 1) % CYLINDER_SEGMENTS;
                    tris.push([lo[i], lo[j], hi[j]]);
                    tris.push([lo[i], hi[j], hi[i]]);
                    tris.push([c_hi, hi[i], hi[j]]);
                    tris.push([c_lo, lo[j], lo[i]]);
                }
            }
            _ => {
                let c = prim.world_corners().expect("block primitive");
                let centre = Point3::from(c.iter().map(|p| p.coords).sum::<Vector3<f64>>() / 8.0);
                for face in Face::ALL {
                    let q = face_corners(&c, face);
                    for t in [[q[0], q[1], q[2]], [q[0], q[2], q[3]]] {
                        let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
                        if n.dot(&(t[0] - centre)) < 0.0 {
                            tris.push([t[0], t[2], t[1]]);
                        } else {
                            tris.push(t);
                        }
                    }
                }
            }
        }
    }
    tris
}

pub fn write_stl<W: Write>(solid: &Solid, name: &str, mut out: W) -> io::Result<()> {
    let tris = triangulate(solid);
    let mut header = [0u8; 80];
    let label = format!("jetdesign {name}");
    let n = label.len().min(80);
    header[..n].copy_from_slice(&label.as_bytes()[..n]);
    out.write_all(&header)?;
    out.write_all(&(tris.len() as u32).to_le_bytes())?;
    for t in &tris {
        let normal = (t[1] - t[0]).cross(&(t[2] - t[0])).try_normalize(0.0).unwrap_or_else(Vector3::zeros);
        for v in std::iter::once(normal).chain(t.iter().map(|p| p.coords)) {
            for x in v.iter() {
                out.write_all(&(*x as f32).to_le_bytes())?;
            }
        }
        out.write_all(&0u16.to_le_bytes())?;
    }
    Ok(())
}

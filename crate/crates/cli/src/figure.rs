//! Force-directed molecule layout and SVG attention heat-maps.

use std::fmt::Write as _;

use chem::MolGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fruchterman-Reingold layout with unit ideal edge length. Disconnected
/// fragments are kept apart by the same repulsion.
pub fn layout(mol: &MolGraph, seed: u64) -> Vec<(f64, f64)> {
    let n = mol.num_atoms();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = (n as f64).sqrt();
    let mut pos: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n.max(1) as f64;
            (radius * a.cos() + rng.gen_range(-0.1..0.1), radius * a.sin() + rng.gen_range(-0.1..0.1))
        })
        .collect();
    if n < 2 {
        return vec![(0.0, 0.0); n];
    }
    let k = 1.0;
    let mut temp = radius;
    for _ in 0..400 {
        let mut disp = vec![(0.0, 0.0); n];
        for i in 0..n {
            for j in i + 1..n {
                let (dx, dy) = (pos[i].0 - pos[j].0, pos[i].1 - pos[j].1);
                let d2 = (dx * dx + dy * dy).max(1e-6);
                let f = k * k / d2;
                disp[i].0 += dx * f;
                disp[i].1 += dy * f;
                disp[j].0 -= dx * f;
                disp[j].1 -= dy * f;
            }
        }
        for b in mol.bonds() {
            let (dx, dy) = (pos[b.a].0 - pos[b.b].0, pos[b.a].1 - pos[b.b].1);
            let d = (dx * dx + dy * dy).sqrt().max(1e-6);
            let f = d / k;
            disp[b.a].0 -= dx * f;
            disp[b.a].1 -= dy * f;
            disp[b.b].0 += dx * f;
            disp[b.b].1 += dy * f;
        }
        for (p, (dx, dy)) in pos.iter_mut().zip(disp) {
            let len = (dx * dx + dy * dy).sqrt().max(1e-9);
            let step = len.min(temp);
            p.0 += dx / len * step;
            p.1 += dy / len * step;
        }
        temp *= 0.985;
    }
    pos
}

fn heat(w: f64) -> String {
    let w = w.clamp(0.0, 1.0);
    let g = (255.0 * (1.0 - 0.85 * w)) as u8;
    let b = (255.0 * (1.0 - w)) as u8;
    format!("#ff{g:02x}{b:02x}")
}

pub struct Panel<'a> {
    pub title: String,
    /// One weight per atom over `[reactant | product]`.
    pub weights: Option<&'a [f64]>,
}

const SCALE: f64 = 38.0;
const PANEL_H: f64 = 320.0;

fn draw_mol(svg: &mut String, mol: &MolGraph, pos: &[(f64, f64)], origin: (f64, f64), weights: &[f64], rc: &[bool], peak: f64) {
    let (minx, miny) = pos.iter().fold((f64::MAX, f64::MAX), |m, p| (m.0.min(p.0), m.1.min(p.1)));
    let at = |i: usize| (origin.0 + (pos[i].0 - minx) * SCALE, origin.1 + (pos[i].1 - miny) * SCALE);
    for b in mol.bonds() {
        let ((x1, y1), (x2, y2)) = (at(b.a), at(b.b));
        let width = match b.order {
            chem::BondOrder::Double => 3.5,
            chem::BondOrder::Triple => 5.0,
            _ => 1.5,
        };
        let _ = writeln!(
            svg,
            r##"<line x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}" stroke="#555" stroke-width="{width}"/>"##
        );
    }
    for i in 0..mol.num_atoms() {
        let (x, y) = at(i);
        let w = if peak > 0.0 { weights[i] / peak } else { 0.0 };
        let stroke = if rc[i] { r##"stroke="#1f4e9c" stroke-width="2.5""## } else { r##"stroke="#999" stroke-width="1""## };
        let _ = writeln!(
            svg,
            r#"<circle cx="{x:.1}" cy="{y:.1}" r="11" fill="{}" {stroke}><title>atom {i}: {:.4}</title></circle>"#,
            heat(w),
            weights[i]
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" font-size="10" text-anchor="middle" font-family="sans-serif">{}</text>"#,
            y + 3.5,
            mol.atom(i).symbol()
        );
    }
}

fn extent(pos: &[(f64, f64)]) -> f64 {
    let (lo, hi) = pos.iter().fold((f64::MAX, f64::MIN), |m, p| (m.0.min(p.0), m.1.max(p.0)));
    if pos.is_empty() {
        0.0
    } else {
        (hi - lo) * SCALE
    }
}

/// Reactant and product graphs, one row per panel, atoms shaded by weight
/// (scaled to the panel maximum) and reaction-center atoms outlined.
pub fn heatmap_svg(reactant: &MolGraph, product: &MolGraph, rc: &[bool], panels: &[Panel], seed: u64) -> String {
    let pr = layout(reactant, seed);
    let pp = layout(product, seed.wrapping_add(1));
    let n = reactant.num_atoms();
    let gap = 80.0;
    let width = 40.0 + extent(&pr) + gap + extent(&pp) + 40.0;
    let height = PANEL_H * panels.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, panel) in panels.iter().enumerate() {
        let top = PANEL_H * k as f64;
        let _ = writeln!(
            svg,
            r#"<text x="20" y="{:.0}" font-size="14" font-family="sans-serif">{}</text>"#,
            top + 22.0,
            panel.title
        );
        let zeros = vec![0.0; rc.len()];
        let w = panel.weights.unwrap_or(&zeros);
        let peak = w.iter().cloned().fold(0.0, f64::max);
        draw_mol(&mut svg, reactant, &pr, (30.0, top + 50.0), &w[..n], &rc[..n], peak);
        let px = 30.0 + extent(&pr) + gap;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.0}" font-size="22" text-anchor="middle">&#8594;</text>"#,
            px - gap / 2.0,
            top + PANEL_H / 2.0
        );
        draw_mol(&mut svg, product, &pp, (px, top + 50.0), &w[n..], &rc[n..], peak);
        if panel.weights.is_none() {
            let _ = writeln!(
                svg,
                r##"<text x="20" y="{:.0}" font-size="12" fill="#888" font-family="sans-serif">no heads of this kind</text>"##,
                top + 40.0
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

//! Synthetic atom-mapped reactions.
//!
//! Each template builds reactant and product graphs from substituents, so
//! every atom shared between the two sides carries the same map number by
//! construction. Conditions and yields are deterministic functions of the
//! template and substituents (plus seeded noise for yields), which gives
//! learnable targets for small training runs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::canon::write_mapped;
use crate::element::{B, BR, C, CL, N, O, S};
use crate::mol::{Atom, Bond, BondOrder, MolGraph};
use crate::smiles::parse_smiles;

const ALKYL: &[&str] = &["C", "CC", "CC(C)C", "C1CC1", "CCOC", "CC(F)(F)F", "CCCC", "C1CCOCC1"];
const ARYL: &[&str] = &["c1ccccc1", "c1ccc(F)cc1", "c1ccc(OC)cc1", "c1ccncc1", "c1ccc(C)cc1", "c1ccc(Cl)cc1", "c1ccsc1"];

/// One generated reaction.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthReaction {
    pub template: &'static str,
    /// Mapped `reactants>>products`.
    pub reaction: String,
    /// Catalyst, solvent 1, solvent 2, reagent 1, reagent 2.
    pub conditions: [Option<String>; 5],
    /// Percent yield in `[0, 100]`.
    pub yield_pct: f64,
}

pub const TEMPLATES: &[&str] = &[
    "amide_coupling",
    "esterification",
    "nitro_reduction",
    "sn2_ether",
    "suzuki",
    "reductive_amination",
    "boc_deprotection",
    "ester_hydrolysis",
    "alcohol_oxidation",
    "acid_chloride_acylation",
    "sulfonamide",
    "alkene_hydrogenation",
];

/// A single fragment under construction.
#[derive(Default)]
struct Frag {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
}

impl Frag {
    fn atom(&mut self, z: u8, tag: Option<u32>) -> usize {
        let mut a = Atom::new(z);
        a.map_num = tag;
        self.atoms.push(a);
        self.atoms.len() - 1
    }

    fn charged(&mut self, z: u8, charge: i8, h: u8, tag: Option<u32>) -> usize {
        let i = self.atom(z, tag);
        self.atoms[i].charge = charge;
        self.atoms[i].explicit_h = Some(h);
        i
    }

    fn bond(&mut self, a: usize, b: usize, order: BondOrder) {
        self.bonds.push(Bond::new(a, b, order));
    }

    /// Copy `sub` in, bonding its first atom to `at` if given. Substituent
    /// atom `k` is tagged `tag + k` when `tag` is set. Returns the index of
    /// the substituent's first atom.
    fn attach(&mut self, sub: &MolGraph, at: Option<usize>, tag: Option<u32>) -> usize {
        let off = self.atoms.len();
        for (k, a) in sub.atoms().iter().enumerate() {
            let mut a = a.clone();
            a.map_num = tag.map(|t| t + k as u32);
            self.atoms.push(a);
        }
        for b in sub.bonds() {
            self.bond(b.a + off, b.b + off, b.order);
        }
        if let Some(at) = at {
            self.bond(at, off, BondOrder::Single);
        }
        off
    }

    fn build(self) -> MolGraph {
        MolGraph::new(self.atoms, self.bonds).expect("template builds a valid graph")
    }
}

const TA: Option<u32> = Some(100);
const TB: Option<u32> = Some(200);

fn tag(t: u32) -> Option<u32> {
    Some(t)
}

/// Reactant fragments, product fragments.
fn build(template: &str, a: &MolGraph, b: &MolGraph) -> (Vec<MolGraph>, Vec<MolGraph>) {
    use BondOrder::*;
    let mut rs = Vec::new();
    let mut ps = Vec::new();
    match template {
        "amide_coupling" | "esterification" | "acid_chloride_acylation" => {
            let (nuc, leave) = match template {
                "amide_coupling" => (N, O),
                "esterification" => (O, O),
                _ => (N, CL),
            };
            let mut r1 = Frag::default();
            let c = r1.atom(C, tag(1));
            let o = r1.atom(O, tag(2));
            r1.bond(c, o, Double);
            let x = r1.atom(leave, None);
            r1.bond(c, x, Single);
            r1.attach(a, Some(c), TA);
            let mut r2 = Frag::default();
            let nu = r2.atom(nuc, tag(3));
            r2.attach(b, Some(nu), TB);
            rs.push(r1.build());
            rs.push(r2.build());
            let mut p = Frag::default();
            let c = p.atom(C, tag(1));
            let o = p.atom(O, tag(2));
            p.bond(c, o, Double);
            let nu = p.atom(nuc, tag(3));
            p.bond(c, nu, Single);
            p.attach(a, Some(c), TA);
            p.attach(b, Some(nu), TB);
            ps.push(p.build());
        }
        "nitro_reduction" => {
            let mut r = Frag::default();
            let n = r.charged(N, 1, 0, tag(1));
            let o1 = r.atom(O, tag(2));
            let o2 = r.charged(O, -1, 0, None);
            r.bond(n, o1, Double);
            r.bond(n, o2, Single);
            r.attach(a, Some(n), TA);
            rs.push(r.build());
            let mut p = Frag::default();
            let n = p.atom(N, tag(1));
            p.attach(a, Some(n), TA);
            ps.push(p.build());
        }
        "sn2_ether" => {
            let mut r1 = Frag::default();
            let c = r1.atom(C, tag(1));
            let br = r1.atom(BR, None);
            r1.bond(c, br, Single);
            r1.attach(a, Some(c), TA);
            let mut r2 = Frag::default();
            let o = r2.atom(O, tag(2));
            r2.attach(b, Some(o), TB);
            rs.push(r1.build());
            rs.push(r2.build());
            let mut p = Frag::default();
            let c = p.atom(C, tag(1));
            let o = p.atom(O, tag(2));
            p.bond(c, o, Single);
            p.attach(a, Some(c), TA);
            p.attach(b, Some(o), TB);
            ps.push(p.build());
        }
        "suzuki" => {
            let mut r1 = Frag::default();
            let root = r1.attach(a, None, TA);
            let br = r1.atom(BR, None);
            r1.bond(root, br, Single);
            let mut r2 = Frag::default();
            let root = r2.attach(b, None, TB);
            let bo = r2.atom(B, None);
            let o1 = r2.atom(O, None);
            let o2 = r2.atom(O, None);
            r2.bond(root, bo, Single);
            r2.bond(bo, o1, Single);
            r2.bond(bo, o2, Single);
            rs.push(r1.build());
            rs.push(r2.build());
            let mut p = Frag::default();
            let ra = p.attach(a, None, TA);
            p.attach(b, Some(ra), TB);
            ps.push(p.build());
        }
        "reductive_amination" => {
            let mut r1 = Frag::default();
            let c = r1.atom(C, tag(1));
            let o = r1.atom(O, tag(2));
            r1.bond(c, o, Double);
            r1.attach(a, Some(c), TA);
            let mut r2 = Frag::default();
            let n = r2.atom(N, tag(3));
            r2.attach(b, Some(n), TB);
            rs.push(r1.build());
            rs.push(r2.build());
            let mut p = Frag::default();
            let c = p.atom(C, tag(1));
            let n = p.atom(N, tag(3));
            p.bond(c, n, Single);
            p.attach(a, Some(c), TA);
            p.attach(b, Some(n), TB);
            ps.push(p.build());
        }
        "boc_deprotection" => {
            let mut r = Frag::default();
            let n = r.atom(N, tag(1));
            let c = r.atom(C, None);
            let o1 = r.atom(O, None);
            let o2 = r.atom(O, None);
            let q = r.atom(C, None);
            r.bond(n, c, Single);
            r.bond(c, o1, Double);
            r.bond(c, o2, Single);
            r.bond(o2, q, Single);
            for _ in 0..3 {
                let m = r.atom(C, None);
                r.bond(q, m, Single);
            }
            r.attach(a, Some(n), TA);
            rs.push(r.build());
            let mut p = Frag::default();
            let n = p.atom(N, tag(1));
            p.attach(a, Some(n), TA);
            ps.push(p.build());
        }
        "ester_hydrolysis" => {
            let mut r = Frag::default();
            let c = r.atom(C, tag(1));
            let o1 = r.atom(O, tag(2));
            let o2 = r.atom(O, tag(3));
            let me = r.atom(C, None);
            r.bond(c, o1, Double);
            r.bond(c, o2, Single);
            r.bond(o2, me, Single);
            r.attach(a, Some(c), TA);
            rs.push(r.build());
            let mut p = Frag::default();
            let c = p.atom(C, tag(1));
            let o1 = p.atom(O, tag(2));
            let o2 = p.atom(O, tag(3));
            p.bond(c, o1, Double);
            p.bond(c, o2, Single);
            p.attach(a, Some(c), TA);
            ps.push(p.build());
        }
        "alcohol_oxidation" => {
            let mut r = Frag::default();
            let c = r.atom(C, tag(1));
            let o = r.atom(O, tag(2));
            r.bond(c, o, Single);
            r.attach(a, Some(c), TA);
            rs.push(r.build());
            let mut p = Frag::default();
            let c = p.atom(C, tag(1));
            let o = p.atom(O, tag(2));
            p.bond(c, o, Double);
            p.attach(a, Some(c), TA);
            ps.push(p.build());
        }
        "sulfonamide" => {
            let mut r1 = Frag::default();
            let s = r1.atom(S, tag(1));
            let o1 = r1.atom(O, tag(2));
            let o2 = r1.atom(O, tag(3));
            let cl = r1.atom(CL, None);
            r1.bond(s, o1, Double);
            r1.bond(s, o2, Double);
            r1.bond(s, cl, Single);
            r1.attach(a, Some(s), TA);
            let mut r2 = Frag::default();
            let n = r2.atom(N, tag(4));
            r2.attach(b, Some(n), TB);
            rs.push(r1.build());
            rs.push(r2.build());
            let mut p = Frag::default();
            let s = p.atom(S, tag(1));
            let o1 = p.atom(O, tag(2));
            let o2 = p.atom(O, tag(3));
            let n = p.atom(N, tag(4));
            p.bond(s, o1, Double);
            p.bond(s, o2, Double);
            p.bond(s, n, Single);
            p.attach(a, Some(s), TA);
            p.attach(b, Some(n), TB);
            ps.push(p.build());
        }
        "alkene_hydrogenation" => {
            for (side, order) in [(&mut rs, Double), (&mut ps, Single)] {
                let mut f = Frag::default();
                let c1 = f.atom(C, tag(1));
                let c2 = f.atom(C, tag(2));
                f.bond(c1, c2, order);
                f.attach(a, Some(c1), TA);
                f.attach(b, Some(c2), TB);
                side.push(f.build());
            }
        }
        other => panic!("unknown template {other}"),
    }
    (rs, ps)
}

/// Condition pools per template: catalysts, solvents, reagents.
fn pools(template: &str) -> (&'static [&'static str], &'static [&'static str], &'static [&'static str]) {
    match template {
        "amide_coupling" => (&[], &["CN(C)C=O", "ClCCl"], &["CCN(C(C)C)C(C)C", "CCN(CC)CC", "On1nnc2ccccc21"]),
        "esterification" => (&[], &["CO", "Cc1ccccc1"], &["OS(=O)(=O)O", "Cc1ccc(S(=O)(=O)O)cc1"]),
        "nitro_reduction" => (&["[Pd]", "[Fe]"], &["CO", "CCO"], &["[H][H]", "Cl"]),
        "sn2_ether" => (&[], &["CC#N", "CN(C)C=O"], &["O=C([O-])[O-].[K+].[K+]", "[H-].[Na+]"]),
        "suzuki" => (&["Cl[Pd]Cl", "[Pd]"], &["C1CCOC1", "O", "Cc1ccccc1"], &["O=C([O-])[O-].[Na+].[Na+]", "O=P([O-])([O-])[O-].[K+].[K+].[K+]"]),
        "reductive_amination" => (&[], &["ClCCCl", "CO"], &["CC(=O)O[BH-](OC(C)=O)OC(C)=O.[Na+]", "CC(=O)O"]),
        "boc_deprotection" => (&[], &["ClCCl", "C1COCCO1"], &["OC(=O)C(F)(F)F", "Cl"]),
        "ester_hydrolysis" => (&[], &["C1CCOC1", "O", "CO"], &["[Li+].[OH-]", "[Na+].[OH-]"]),
        "alcohol_oxidation" => (&[], &["ClCCl"], &["CS(C)=O", "O=C(Cl)C(=O)Cl", "CCN(CC)CC"]),
        "acid_chloride_acylation" => (&[], &["ClCCl", "C1CCOC1"], &["CCN(CC)CC", "c1ccncc1"]),
        "sulfonamide" => (&[], &["ClCCl", "c1ccncc1"], &["c1ccncc1", "CCN(CC)CC"]),
        "alkene_hydrogenation" => (&["[Pd]", "[Pt]"], &["CO", "CCOC(C)=O"], &["[H][H]"]),
        _ => (&[], &[], &[]),
    }
}

fn pick<'a>(pool: &'a [&'a str], key: usize) -> Option<String> {
    (!pool.is_empty()).then(|| pool[key % pool.len()].to_string())
}

/// Substituent pools for slot A and slot B of a template.
fn slots(template: &str) -> (&'static [&'static str], &'static [&'static str]) {
    match template {
        "nitro_reduction" | "suzuki" => (ARYL, ARYL),
        _ => (ALKYL, ARYL),
    }
}

/// Generate `count` reactions cycling through the templates.
pub fn generate(count: usize, seed: u64) -> Vec<SynthReaction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parse_all = |v: &[&str]| v.iter().map(|s| parse_smiles(s).expect("valid substituent")).collect::<Vec<_>>();
    let alkyl = parse_all(ALKYL);
    let aryl = parse_all(ARYL);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let template = TEMPLATES[i % TEMPLATES.len()];
        let (sa, sb) = slots(template);
        let ia = rng.gen_range(0..sa.len());
        let ib = rng.gen_range(0..sb.len());
        let ga = if std::ptr::eq(sa, ALKYL) { &alkyl[ia] } else { &aryl[ia] };
        let gb = if std::ptr::eq(sb, ALKYL) { &alkyl[ib] } else { &aryl[ib] };
        let (mut rs, ps) = build(template, ga, gb);
        rs.shuffle(&mut rng);

        let (cats, solvs, reags) = pools(template);
        let key = ia * 7 + ib;
        let conditions = [
            pick(cats, ia),
            pick(solvs, key),
            if solvs.len() > 2 && ib % 2 == 0 { pick(solvs, key + 1) } else { None },
            pick(reags, ia + ib),
            if reags.len() > 2 && ia % 2 == 1 { pick(reags, ia + ib + 1) } else { None },
        ];

        let heavy = (ga.num_atoms() + gb.num_atoms()) as f64;
        let base = 25.0 + 2.0 * (i % TEMPLATES.len()) as f64;
        let noise: f64 = rng.gen_range(-2.0..2.0);
        let yield_pct = (base + 1.5 * heavy - 2.0 * ia as f64 + noise).clamp(0.0, 100.0);

        let side = |gs: &[MolGraph]| gs.iter().map(write_mapped).collect::<Vec<_>>().join(".");
        out.push(SynthReaction {
            template,
            reaction: format!("{}>>{}", side(&rs), side(&ps)),
            conditions,
            yield_pct,
        });
    }
    out
}

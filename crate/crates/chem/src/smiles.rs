//! Daylight SMILES parser.

use std::collections::BTreeMap;

use crate::element;
use crate::error::{ChemError, Result};
use crate::mol::{Atom, Bond, BondOrder, BondStereo, Chirality, MolGraph};

#[derive(Clone, Copy, Debug, PartialEq)]
struct BondSpec {
    order: BondOrder,
    stereo: BondStereo,
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    /// Bonds with an explicit flag; implicit aromatic-aromatic bonds may be
    /// demoted later.
    bonds: Vec<(Bond, bool)>,
    rings: BTreeMap<u32, (usize, Option<BondSpec>, usize)>,
    atom_pos: Vec<usize>,
}

/// Parse a single- or multi-fragment SMILES string into one graph.
pub fn parse_smiles(text: &str) -> Result<MolGraph> {
    let mut p = Parser {
        text,
        bytes: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        rings: BTreeMap::new(),
        atom_pos: Vec::new(),
    };
    p.parse()?;
    p.finish()
}

impl<'a> Parser<'a> {
    fn err<T>(&self, pos: usize, msg: impl Into<String>) -> Result<T> {
        Err(ChemError::Smiles {
            input: self.text.to_string(),
            pos,
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn parse(&mut self) -> Result<()> {
        if self.bytes.is_empty() {
            return self.err(0, "empty SMILES");
        }
        let mut prev: Option<usize> = None;
        let mut branches: Vec<(Option<usize>, usize)> = Vec::new();
        let mut pending: Option<(BondSpec, usize)> = None;
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    if prev.is_none() || pending.is_some() {
                        return self.err(start, "branch must follow an atom");
                    }
                    branches.push((prev, start));
                    self.pos += 1;
                }
                b')' => {
                    let Some((p, _)) = branches.pop() else {
                        return self.err(start, "unmatched ')'");
                    };
                    if pending.is_some() {
                        return self.err(start, "bond without a following atom");
                    }
                    if self.bytes.get(start.wrapping_sub(1)) == Some(&b'(') {
                        return self.err(start, "empty branch");
                    }
                    prev = p;
                    self.pos += 1;
                }
                b'.' => {
                    if pending.is_some() || prev.is_none() {
                        return self.err(start, "misplaced '.'");
                    }
                    prev = None;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b'$' | b':' | b'/' | b'\\' => {
                    if pending.is_some() {
                        return self.err(start, "two consecutive bond symbols");
                    }
                    if prev.is_none() {
                        return self.err(start, "bond symbol must follow an atom");
                    }
                    let spec = match c {
                        b'-' => BondSpec { order: BondOrder::Single, stereo: BondStereo::None },
                        b'=' => BondSpec { order: BondOrder::Double, stereo: BondStereo::None },
                        b'#' => BondSpec { order: BondOrder::Triple, stereo: BondStereo::None },
                        b':' => BondSpec { order: BondOrder::Aromatic, stereo: BondStereo::None },
                        b'/' => BondSpec { order: BondOrder::Single, stereo: BondStereo::Up },
                        b'\\' => BondSpec { order: BondOrder::Single, stereo: BondStereo::Down },
                        _ => return self.err(start, "quadruple bonds are not supported"),
                    };
                    pending = Some((spec, start));
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let Some(atom) = prev else {
                        return self.err(start, "ring closure must follow an atom");
                    };
                    let digit = self.ring_number()?;
                    let spec = pending.take().map(|(s, _)| s);
                    self.ring_closure(atom, digit, spec, start)?;
                }
                _ => {
                    let idx = self.atom()?;
                    if let Some(p) = prev {
                        let spec = pending.take().map(|(s, _)| s);
                        self.add_bond(p, idx, spec, start)?;
                    } else if pending.is_some() {
                        return self.err(start, "bond without a preceding atom");
                    }
                    prev = Some(idx);
                }
            }
        }
        if let Some((_, pos)) = pending {
            return self.err(pos, "dangling bond at end of input");
        }
        if let Some(&(_, pos)) = branches.last() {
            return self.err(pos, "unclosed '('");
        }
        if let Some((digit, &(_, _, pos))) = self.rings.iter().next() {
            return self.err(pos, format!("unclosed ring bond {digit}"));
        }
        if prev.is_none() {
            return self.err(self.bytes.len(), "input ends with '.'");
        }
        Ok(())
    }

    fn ring_number(&mut self) -> Result<u32> {
        let start = self.pos;
        if self.peek() == Some(b'%') {
            let digits = self.bytes.get(self.pos + 1..self.pos + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    Ok(((d[0] - b'0') * 10 + (d[1] - b'0')) as u32)
                }
                _ => self.err(start, "'%' must be followed by two digits"),
            }
        } else {
            self.pos += 1;
            Ok((self.bytes[start] - b'0') as u32)
        }
    }

    fn ring_closure(
        &mut self,
        atom: usize,
        digit: u32,
        spec: Option<BondSpec>,
        pos: usize,
    ) -> Result<()> {
        match self.rings.remove(&digit) {
            None => {
                self.rings.insert(digit, (atom, spec, pos));
                Ok(())
            }
            Some((other, open_spec, _)) => {
                if other == atom {
                    return self.err(pos, format!("ring bond {digit} closes on its own atom"));
                }
                let spec = match (open_spec, spec) {
                    (Some(a), Some(b)) if a.order != b.order => {
                        return self.err(pos, format!("conflicting bond orders on ring bond {digit}"));
                    }
                    (Some(a), _) => Some(a),
                    (None, b) => b,
                };
                self.add_bond(other, atom, spec, pos)
            }
        }
    }

    fn add_bond(&mut self, a: usize, b: usize, spec: Option<BondSpec>, pos: usize) -> Result<()> {
        if self
            .bonds
            .iter()
            .any(|(x, _)| (x.a == a && x.b == b) || (x.a == b && x.b == a))
        {
            return self.err(pos, format!("duplicate bond between atoms {a} and {b}"));
        }
        let (bond, explicit) = match spec {
            Some(s) => {
                let mut bond = Bond::new(a, b, s.order);
                bond.stereo = s.stereo;
                (bond, true)
            }
            None => {
                let order = if self.atoms[a].aromatic && self.atoms[b].aromatic {
                    BondOrder::Aromatic
                } else {
                    BondOrder::Single
                };
                (Bond::new(a, b, order), false)
            }
        };
        self.bonds.push((bond, explicit));
        Ok(())
    }

    fn atom(&mut self) -> Result<usize> {
        let start = self.pos;
        let atom = if self.peek() == Some(b'[') {
            self.bracket_atom()?
        } else {
            self.organic_atom()?
        };
        self.atoms.push(atom);
        self.atom_pos.push(start);
        Ok(self.atoms.len() - 1)
    }

    fn organic_atom(&mut self) -> Result<Atom> {
        let start = self.pos;
        let rest = &self.text[start..];
        let (z, aromatic, len) = if rest.starts_with("Cl") {
            (element::CL, false, 2)
        } else if rest.starts_with("Br") {
            (element::BR, false, 2)
        } else {
            let c = rest.as_bytes()[0];
            match c {
                b'B' => (element::B, false, 1),
                b'C' => (element::C, false, 1),
                b'N' => (element::N, false, 1),
                b'O' => (element::O, false, 1),
                b'P' => (element::P, false, 1),
                b'S' => (element::S, false, 1),
                b'F' => (element::F, false, 1),
                b'I' => (element::I, false, 1),
                b'b' => (element::B, true, 1),
                b'c' => (element::C, true, 1),
                b'n' => (element::N, true, 1),
                b'o' => (element::O, true, 1),
                b'p' => (element::P, true, 1),
                b's' => (element::S, true, 1),
                _ => {
                    let ch = rest.chars().next().unwrap_or('?');
                    return self.err(start, format!("unexpected character {ch:?}"));
                }
            }
        };
        self.pos += len;
        let mut atom = Atom::new(z);
        atom.aromatic = aromatic;
        Ok(atom)
    }

    fn bracket_atom(&mut self) -> Result<Atom> {
        let open = self.pos;
        let Some(close) = self.text[open..].find(']').map(|i| open + i) else {
            return self.err(open, "unclosed '['");
        };
        let body = &self.text[open + 1..close];
        let b = body.as_bytes();
        let mut i = 0;
        let at = |i: usize| open + 1 + i;

        let iso_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        let isotope = if i > iso_start {
            match body[iso_start..i].parse::<u16>() {
                Ok(v) => Some(v),
                Err(_) => return self.err(at(iso_start), "isotope out of range"),
            }
        } else {
            None
        };

        let (z, aromatic, len) = self.bracket_symbol(&body[i..], at(i))?;
        i += len;

        let mut chirality = Chirality::None;
        if i < b.len() && b[i] == b'@' {
            i += 1;
            chirality = Chirality::Anticlockwise;
            if i < b.len() && b[i] == b'@' {
                i += 1;
                chirality = Chirality::Clockwise;
            } else if ["TH", "AL", "SP", "TB", "OH"]
                .iter()
                .any(|p| body[i..].starts_with(p))
            {
                // Extended chirality classes are kept as opaque anticlockwise.
                i += 2;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
            }
        }

        let mut hcount = 0u8;
        if i < b.len() && b[i] == b'H' {
            i += 1;
            hcount = 1;
            let s = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            if i > s {
                hcount = match body[s..i].parse() {
                    Ok(v) => v,
                    Err(_) => return self.err(at(s), "hydrogen count out of range"),
                };
            }
        }

        let mut charge: i32 = 0;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            let sign = if b[i] == b'+' { 1 } else { -1 };
            let sym = b[i];
            i += 1;
            let s = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            let mag = if i > s {
                match body[s..i].parse::<i32>() {
                    Ok(v) => v,
                    Err(_) => return self.err(at(s), "charge out of range"),
                }
            } else {
                let mut m = 1;
                while i < b.len() && b[i] == sym {
                    m += 1;
                    i += 1;
                }
                m
            };
            charge = sign * mag;
            if !(-15..=15).contains(&charge) {
                return self.err(at(s), "charge out of range");
            }
        }

        let mut map_num = None;
        if i < b.len() && b[i] == b':' {
            i += 1;
            let s = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            if i == s {
                return self.err(at(s), "':' in bracket atom needs a class number");
            }
            map_num = match body[s..i].parse::<u32>() {
                Ok(0) => None,
                Ok(v) => Some(v),
                Err(_) => return self.err(at(s), "atom class out of range"),
            };
        }

        if i != b.len() {
            return self.err(at(i), format!("invalid bracket atom [{body}]"));
        }
        self.pos = close + 1;
        Ok(Atom {
            element: z,
            charge: charge as i8,
            explicit_h: Some(hcount),
            map_num,
            aromatic,
            isotope,
            chirality,
        })
    }

    fn bracket_symbol(&self, s: &str, pos: usize) -> Result<(u8, bool, usize)> {
        let bytes = s.as_bytes();
        let Some(&first) = bytes.first() else {
            return self.err(pos, "missing element symbol");
        };
        if first.is_ascii_lowercase() {
            for (sym, z) in [("se", 34u8), ("as", 33), ("te", 52)] {
                if s.starts_with(sym) {
                    return Ok((z, true, 2));
                }
            }
            let z = match first {
                b'b' => element::B,
                b'c' => element::C,
                b'n' => element::N,
                b'o' => element::O,
                b'p' => element::P,
                b's' => element::S,
                _ => return self.err(pos, format!("unknown aromatic symbol in {s:?}")),
            };
            return Ok((z, true, 1));
        }
        if !first.is_ascii_uppercase() {
            return self.err(pos, format!("unknown element symbol in {s:?}"));
        }
        if bytes.len() >= 2 && bytes[1].is_ascii_lowercase() {
            if let Some(z) = element::from_symbol(&s[..2]) {
                return Ok((z, false, 2));
            }
        }
        match element::from_symbol(&s[..1]) {
            Some(z) => Ok((z, false, 1)),
            None => self.err(pos, format!("unknown element symbol in {s:?}")),
        }
    }

    fn finish(self) -> Result<MolGraph> {
        let implicit: Vec<bool> = self.bonds.iter().map(|(_, e)| !e).collect();
        let mut bonds: Vec<Bond> = self.bonds.into_iter().map(|(b, _)| b).collect();
        let in_ring = ring_flags(&self.atoms, &bonds);
        for (i, atom) in self.atoms.iter().enumerate() {
            let on_ring = bonds
                .iter()
                .zip(&in_ring)
                .any(|(b, &r)| r && (b.a == i || b.b == i));
            if atom.aromatic && !on_ring {
                return Err(ChemError::Smiles {
                    input: self.text.to_string(),
                    pos: self.atom_pos[i],
                    msg: format!("aromatic atom {} is not in a ring", atom.symbol()),
                });
            }
        }
        // An implicit bond between aromatic atoms that is not in a ring (the
        // biaryl bond in c1ccccc1c1ccccc1) is single.
        for (k, bond) in bonds.iter_mut().enumerate() {
            if implicit[k] && bond.order == BondOrder::Aromatic && !in_ring[k] {
                bond.order = BondOrder::Single;
            }
        }
        MolGraph::new(self.atoms, bonds)
    }
}

fn ring_flags(atoms: &[Atom], bonds: &[Bond]) -> Vec<bool> {
    let plain: Vec<Atom> = atoms
        .iter()
        .map(|a| Atom {
            aromatic: false,
            map_num: None,
            ..a.clone()
        })
        .collect();
    MolGraph::new(plain, bonds.to_vec())
        .map(|g| g.bonds().iter().map(|b| b.in_ring).collect())
        .unwrap_or_else(|_| vec![false; bonds.len()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ethanol() {
        let g = parse_smiles("CCO").unwrap();
        assert_eq!(g.num_atoms(), 3);
        assert_eq!(g.num_bonds(), 2);
        assert!(g.bonds().iter().all(|b| b.order == BondOrder::Single));
        assert_eq!(g.total_h(), &[3, 2, 1]);
    }

    #[test]
    fn benzene() {
        let g = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(g.num_atoms(), 6);
        assert!(g.atoms().iter().all(|a| a.aromatic && a.element == 6));
        assert_eq!(g.num_bonds(), 6);
        assert!(g.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
        assert_eq!(g.total_h(), &[1; 6]);
    }

    #[test]
    fn bracket_maps() {
        let g = parse_smiles("[CH3:1][OH:2]").unwrap();
        let maps: Vec<_> = g.atoms().iter().map(|a| a.map_num).collect();
        assert_eq!(maps, vec![Some(1), Some(2)]);
        let h: Vec<_> = g.atoms().iter().map(|a| a.explicit_h).collect();
        assert_eq!(h, vec![Some(3), Some(1)]);
    }

    #[test]
    fn heteroaromatics() {
        assert_eq!(parse_smiles("c1ccncc1").unwrap().total_h(), &[1, 1, 1, 0, 1, 1]);
        assert_eq!(parse_smiles("c1ccsc1").unwrap().total_h()[3], 0);
        assert_eq!(parse_smiles("c1cc[nH]c1").unwrap().total_h()[3], 1);
        assert_eq!(parse_smiles("c1ccoc1").unwrap().total_h()[3], 0);
    }

    #[test]
    fn biaryl_bond_is_single() {
        let g = parse_smiles("c1ccccc1c1ccccc1").unwrap();
        let single: Vec<_> = g.bonds().iter().filter(|b| b.order == BondOrder::Single).collect();
        assert_eq!(single.len(), 1);
        assert!(!single[0].in_ring);
    }

    #[test]
    fn charges_isotopes_and_valence() {
        let g = parse_smiles("[13CH4]").unwrap();
        assert_eq!(g.atom(0).isotope, Some(13));
        let g = parse_smiles("[NH4+].[Cl-]").unwrap();
        assert_eq!(g.atom(0).charge, 1);
        assert_eq!(g.atom(1).charge, -1);
        assert_eq!(parse_smiles("[Fe+++]").unwrap().atom(0).charge, 3);
        assert_eq!(parse_smiles("[O-2]").unwrap().atom(0).charge, -2);
        assert_eq!(parse_smiles("CS(=O)(=O)C").unwrap().total_h()[1], 0);
        assert_eq!(parse_smiles("OP(O)(O)=O").unwrap().total_h()[1], 0);
        assert_eq!(parse_smiles("C#N").unwrap().total_h(), &[1, 0]);
    }

    #[test]
    fn ring_closures_and_branches() {
        let g = parse_smiles("C1CC%12CC1CC%12").unwrap();
        assert_eq!(g.num_bonds(), 8);
        let g = parse_smiles("CC(C)(C)C").unwrap();
        assert_eq!(g.degree(1), 4);
        let g = parse_smiles("C=1CCCCC1").unwrap();
        assert_eq!(g.bond_between(0, 5).unwrap().order, BondOrder::Double);
    }

    #[test]
    fn stereo_is_parsed() {
        let g = parse_smiles("F/C=C/F").unwrap();
        assert_eq!(g.bonds()[0].stereo, BondStereo::Up);
        let g = parse_smiles("N[C@@H](C)C(=O)O").unwrap();
        assert_eq!(g.atom(1).chirality, Chirality::Clockwise);
    }

    #[test]
    fn errors_carry_positions() {
        let cases = [
            ("C1CC", 1),
            ("C(C", 1),
            ("CC)", 2),
            ("[Xy]", 1),
            ("C[CH3", 1),
            ("CX", 1),
            ("C==C", 2),
            ("", 0),
        ];
        for (s, pos) in cases {
            match parse_smiles(s) {
                Err(ChemError::Smiles { pos: p, .. }) => assert_eq!(p, pos, "{s}"),
                other => panic!("{s}: {other:?}"),
            }
        }
    }

    #[test]
    fn aromatic_outside_ring_rejected() {
        assert!(parse_smiles("cC").is_err());
    }

    #[test]
    fn duplicate_map_rejected() {
        assert_eq!(
            parse_smiles("[CH3:1][CH3:1]").unwrap_err(),
            ChemError::DuplicateMap(1)
        );
    }
}

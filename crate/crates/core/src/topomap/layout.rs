use serde::Serialize;

use crate::error::{Error, Result};

/// DEAP 32-channel recording order.
pub const CHANNEL_NAMES: [&str; 32] = [
    "Fp1", "AF3", "F3", "F7", "FC5", "FC1", "C3", "T7", "CP5", "CP1", "P3", "P7", "PO3", "O1",
    "Oz", "Pz", "Fp2", "AF4", "Fz", "F4", "F8", "FC6", "FC2", "Cz", "C4", "T8", "CP6", "CP2", "P4",
    "P8", "PO4", "O2",
];

/// Position on the idealised spherical head. `polar_deg` is the angle from
/// the vertex (Cz); `azimuth_deg` is measured from the nose, positive
/// towards the right ear.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SphericalPos {
    pub polar_deg: f64,
    pub azimuth_deg: f64,
}

/// Idealised 10-20 positions for the DEAP montage, in channel order.
const SPHERICAL: [(f64, f64); 32] = [
    (92.0, -18.0),  // Fp1
    (74.0, -23.0),  // AF3
    (60.0, -39.0),  // F3
    (92.0, -54.0),  // F7
    (71.0, -69.0),  // FC5
    (32.0, -45.0),  // FC1
    (46.0, -90.0),  // C3
    (92.0, -90.0),  // T7
    (71.0, -111.0), // CP5
    (32.0, -135.0), // CP1
    (60.0, -141.0), // P3
    (92.0, -126.0), // P7
    (74.0, -157.0), // PO3
    (92.0, -162.0), // O1
    (92.0, 180.0),  // Oz
    (46.0, 180.0),  // Pz
    (92.0, 18.0),   // Fp2
    (74.0, 23.0),   // AF4
    (46.0, 0.0),    // Fz
    (60.0, 39.0),   // F4
    (92.0, 54.0),   // F8
    (71.0, 69.0),   // FC6
    (32.0, 45.0),   // FC2
    (0.0, 0.0),     // Cz
    (46.0, 90.0),   // C4
    (92.0, 90.0),   // T8
    (71.0, 111.0),  // CP6
    (32.0, 135.0),  // CP2
    (60.0, 141.0),  // P4
    (92.0, 126.0),  // P8
    (74.0, 157.0),  // PO4
    (92.0, 162.0),  // O2
];

/// Polar angle that maps to the rim of the unit disk.
const RIM_DEG: f64 = 100.0;

pub fn deap_spherical() -> Vec<SphericalPos> {
    SPHERICAL
        .iter()
        .map(|&(polar_deg, azimuth_deg)| SphericalPos {
            polar_deg,
            azimuth_deg,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Electrode {
    pub name: String,
    /// Towards the right ear.
    pub x: f64,
    /// Towards the nose.
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ElectrodeLayout {
    entries: Vec<Electrode>,
}

impl ElectrodeLayout {
    pub fn entries(&self) -> &[Electrode] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.entries.iter().map(|e| [e.x, e.y]).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }
}

/// Azimuthal equidistant projection: distance from the centre is
/// proportional to the polar angle, direction follows the azimuth.
pub fn project_layout(names: &[&str], positions: &[SphericalPos]) -> Result<ElectrodeLayout> {
    if names.len() != positions.len() {
        return Err(Error::Layout(format!(
            "{} names for {} positions",
            names.len(),
            positions.len()
        )));
    }
    let mut entries: Vec<Electrode> = Vec::with_capacity(names.len());
    for (name, pos) in names.iter().zip(positions) {
        if !(0.0..=RIM_DEG).contains(&pos.polar_deg) || !pos.azimuth_deg.is_finite() {
            return Err(Error::Layout(format!(
                "{name}: polar angle {} outside the head",
                pos.polar_deg
            )));
        }
        let r = pos.polar_deg / RIM_DEG;
        let az = pos.azimuth_deg.to_radians();
        let x = if pos.azimuth_deg.rem_euclid(180.0) == 0.0 {
            0.0
        } else {
            r * az.sin()
        };
        let e = Electrode {
            name: name.to_string(),
            x,
            y: r * az.cos(),
        };
        if let Some(dup) = entries
            .iter()
            .find(|o| o.name == e.name || (o.x - e.x).hypot(o.y - e.y) < 1e-9)
        {
            return Err(Error::Layout(format!(
                "{} coincides with {}",
                e.name, dup.name
            )));
        }
        entries.push(e);
    }
    Ok(ElectrodeLayout { entries })
}

/// The DEAP montage projected onto the unit disk.
pub fn deap_layout() -> ElectrodeLayout {
    project_layout(&CHANNEL_NAMES, &deap_spherical()).expect("embedded table is valid")
}

/// Index of the left-right homologue of channel `i` (midline channels map
/// to themselves).
pub fn mirror_index(i: usize) -> usize {
    let name = CHANNEL_NAMES[i];
    let (stem, digits): (String, String) = name.chars().partition(|c| !c.is_ascii_digit());
    let twin = match digits.parse::<u32>() {
        Ok(n) if n % 2 == 1 => format!("{stem}{}", n + 1),
        Ok(n) => format!("{stem}{}", n - 1),
        Err(_) => name.to_string(),
    };
    CHANNEL_NAMES
        .iter()
        .position(|&c| c == twin)
        .expect("montage is symmetric")
}

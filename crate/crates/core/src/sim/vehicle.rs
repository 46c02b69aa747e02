use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleKind {
    Free,
    PlatoonLeader,
    PlatoonMember,
    Merging,
}

impl VehicleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VehicleKind::Free => "free",
            VehicleKind::PlatoonLeader => "platoon_leader",
            VehicleKind::PlatoonMember => "platoon_member",
            VehicleKind::Merging => "merging",
        }
    }

    pub fn in_platoon(self) -> bool {
        matches!(self, VehicleKind::PlatoonLeader | VehicleKind::PlatoonMember)
    }
}

/// Membership of a vehicle in a platoon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlatoonSlot {
    /// Index into the world's platoon list.
    pub platoon: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: u64,
    pub lane: usize,
    /// Front bumper, metres along the segment. Negative while still upstream.
    pub position: f64,
    pub speed: f64,
    pub accel: f64,
    pub length: f64,
    pub kind: VehicleKind,
    pub assertiveness: f64,
    pub platoon: Option<PlatoonSlot>,
    pub entry_time: f64,
    pub entry_position: f64,
}

impl Vehicle {
    pub fn rear(&self) -> f64 {
        self.position - self.length
    }
}

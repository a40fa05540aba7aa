//! Host memory holding saved contexts at fixed per-slot addresses.

use std::collections::BTreeMap;

use super::snapshot::{encoded_len, Snapshot};
use super::EpochError;
use crate::fabricsim::DeviceModel;

/// Base addresses used for the two demo slots.
pub const DEMO_REGION_BASES: [u32; 2] = [0x0000_000A, 0x000B_0000];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub base_address: u32,
    pub capacity_frames: usize,
    /// Bytes reserved: a full snapshot of `capacity_frames` frames.
    pub size_bytes: usize,
}

impl Region {
    fn end(&self) -> usize {
        self.base_address as usize + self.size_bytes
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DramStore {
    regions: BTreeMap<String, Region>,
    contents: Vec<u8>,
}

impl DramStore {
    pub fn new() -> Self {
        DramStore::default()
    }

    /// One region per slot of the device, sized to the slot's frame set.
    /// The first two slots use the demo base addresses; later slots follow
    /// the highest region.
    pub fn for_device(dev: &DeviceModel) -> Self {
        let mut store = DramStore::new();
        for (i, slot) in dev.slots().iter().enumerate() {
            let frames = dev.slot_frames(slot).len();
            let base = match DEMO_REGION_BASES.get(i) {
                Some(&b) if store.fits_at(b, slot, frames) => b,
                _ => store.next_free_base(),
            };
            store
                .allocate(slot, base, frames)
                .expect("region placed in free space");
        }
        store
    }

    fn next_free_base(&self) -> u32 {
        let end = self.regions.values().map(Region::end).max().unwrap_or(0);
        end.next_multiple_of(0x1_0000) as u32
    }

    fn fits_at(&self, base: u32, slot: &str, frames: usize) -> bool {
        let size = encoded_len(slot.len(), frames);
        let (start, end) = (base as usize, base as usize + size);
        self.regions
            .values()
            .all(|r| end <= r.base_address as usize || start >= r.end())
    }

    pub fn allocate(
        &mut self,
        slot: &str,
        base_address: u32,
        capacity_frames: usize,
    ) -> Result<Region, EpochError> {
        if self.regions.contains_key(slot) {
            return Err(EpochError::RegionConflict(format!(
                "slot `{slot}` already has a region"
            )));
        }
        if !self.fits_at(base_address, slot, capacity_frames) {
            return Err(EpochError::RegionConflict(format!(
                "region for `{slot}` at {base_address:#010x} overlaps another region"
            )));
        }
        let region = Region {
            base_address,
            capacity_frames,
            size_bytes: encoded_len(slot.len(), capacity_frames),
        };
        if self.contents.len() < region.end() {
            self.contents.resize(region.end(), 0);
        }
        self.regions.insert(slot.to_string(), region);
        Ok(region)
    }

    pub fn region(&self, slot: &str) -> Option<Region> {
        self.regions.get(slot).copied()
    }

    pub fn regions(&self) -> impl Iterator<Item = (&str, &Region)> {
        self.regions.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn contents(&self) -> &[u8] {
        &self.contents
    }

    fn region_for(&self, slot: &str) -> Result<Region, EpochError> {
        self.region(slot)
            .ok_or_else(|| EpochError::UnknownRegion(slot.to_string()))
    }

    /// Fails unless a snapshot of `n_frames` frames fits the slot's region.
    pub fn check_fits(&self, slot: &str, n_frames: usize) -> Result<(), EpochError> {
        let region = self.region_for(slot)?;
        if n_frames > region.capacity_frames {
            return Err(EpochError::RegionOverflow {
                slot: slot.to_string(),
                frames: n_frames,
                capacity: region.capacity_frames,
            });
        }
        Ok(())
    }

    /// Stores `snapshot` in its slot's region and returns the bytes written.
    pub fn write_snapshot(&mut self, snapshot: &Snapshot) -> Result<usize, EpochError> {
        self.check_fits(snapshot.slot_id(), snapshot.frames().len())?;
        let region = self.region_for(snapshot.slot_id())?;
        let bytes = snapshot.to_bytes();
        let start = region.base_address as usize;
        self.contents[start..start + bytes.len()].copy_from_slice(&bytes);
        Ok(bytes.len())
    }

    pub fn read_snapshot(&self, slot: &str) -> Result<Snapshot, EpochError> {
        let region = self.region_for(slot)?;
        let bytes = &self.contents[region.base_address as usize..region.end()];
        let snapshot = Snapshot::from_bytes(bytes)?;
        if snapshot.slot_id() != slot {
            return Err(EpochError::InvalidSnapshot(format!(
                "region of `{slot}` holds a snapshot of `{}`",
                snapshot.slot_id()
            )));
        }
        Ok(snapshot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitcodec::{Frame, FrameAddress};

    fn snap(slot: &str, n: usize) -> Snapshot {
        let frames = (0..n)
            .map(|i| {
                (
                    FrameAddress::decode(0x0042_0100 + i as u32).unwrap(),
                    Frame::zeroed(),
                )
            })
            .collect();
        Snapshot::new(slot, 7, 1, frames, false).unwrap()
    }

    #[test]
    fn demo_regions() {
        let dev = DeviceModel::demo();
        let store = DramStore::for_device(&dev);
        assert_eq!(store.region("slot0").unwrap().base_address, 0x0000_000A);
        assert_eq!(store.region("slot1").unwrap().base_address, 0x000B_0000);
        assert_eq!(store.region("slot0").unwrap().capacity_frames, 6);
    }

    #[test]
    fn write_read_and_overflow() {
        let mut store = DramStore::new();
        store.allocate("a", 0x10, 2).unwrap();
        assert!(store.read_snapshot("a").is_err());
        let s = snap("a", 2);
        store.write_snapshot(&s).unwrap();
        assert_eq!(store.read_snapshot("a").unwrap(), s);
        assert!(matches!(
            store.write_snapshot(&snap("a", 3)),
            Err(EpochError::RegionOverflow {
                frames: 3,
                capacity: 2,
                ..
            })
        ));
        assert!(matches!(
            store.read_snapshot("b"),
            Err(EpochError::UnknownRegion(_))
        ));
    }

    #[test]
    fn regions_are_disjoint() {
        let mut store = DramStore::new();
        let r = store.allocate("a", 0x100, 1).unwrap();
        assert!(store
            .allocate("b", 0x100 + r.size_bytes as u32 - 1, 1)
            .is_err());
        assert!(store.allocate("b", 0x100 + r.size_bytes as u32, 1).is_ok());
        assert!(store.allocate("a", 0x10_0000, 1).is_err());
    }
}

//! Simulated hosts, cloud shares and the tick engine.
//!
//! A tick is a synchronous round: infection decisions read the infected set
//! as it stood when the tick began. Within a tick the phases run in a fixed
//! order (encrypt, sync, cloud open, contact edges, AV scans) and hosts,
//! shares and edges are visited in id order, so the event log is a pure
//! function of the initial world and the random stream.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, PayloadLayout};
use crate::defense::{self, AvConfig, AvKind};
use crate::variant::{LineageError, LineageTree, SurfaceSignature, VariantId};

/// Executables dropped by one fresh infection.
pub const DROPPED_EXECUTABLES: usize = 3;
pub const RANDOM_NAME_LEN: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HostId(pub u32);

impl fmt::Display for HostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FileId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InfectionVector {
    EmailAttachment,
    Download,
    RemovableMedia,
    SecurityExploit,
    P2p,
    Malvertising,
    CloudSync,
}

impl InfectionVector {
    pub const ALL: [InfectionVector; 7] = [
        InfectionVector::EmailAttachment,
        InfectionVector::Download,
        InfectionVector::RemovableMedia,
        InfectionVector::SecurityExploit,
        InfectionVector::P2p,
        InfectionVector::Malvertising,
        InfectionVector::CloudSync,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InfectionVector::EmailAttachment => "EMAIL_ATTACHMENT",
            InfectionVector::Download => "DOWNLOAD",
            InfectionVector::RemovableMedia => "REMOVABLE_MEDIA",
            InfectionVector::SecurityExploit => "SECURITY_EXPLOIT",
            InfectionVector::P2p => "P2P",
            InfectionVector::Malvertising => "MALVERTISING",
            InfectionVector::CloudSync => "CLOUD_SYNC",
        }
    }
}

impl fmt::Display for InfectionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FileStatus {
    Clean,
    Infected(VariantId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub id: FileId,
    pub name: String,
    /// Plain bytes while clean; a serialized [`PayloadLayout`] once infected.
    pub content: Vec<u8>,
    pub status: FileStatus,
    pub visible_extension: bool,
    pub is_dropped_executable: bool,
}

impl FileRecord {
    pub fn owner(&self) -> Option<VariantId> {
        match self.status {
            FileStatus::Infected(v) => Some(v),
            FileStatus::Clean => None,
        }
    }

    pub fn is_infected(&self) -> bool {
        self.owner().is_some()
    }

    /// An encrypted victim file, as opposed to a dropped executable.
    pub fn is_encrypted_document(&self) -> bool {
        self.is_infected() && !self.is_dropped_executable
    }
}

/// Registry and shell settings the virus tampers with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemFlags {
    pub uac_enabled: bool,
    pub task_manager_enabled: bool,
    pub explorer_running: bool,
    pub extensions_shown: bool,
    pub hidden_files_shown: bool,
}

impl SystemFlags {
    pub const BENIGN: SystemFlags = SystemFlags {
        uac_enabled: true,
        task_manager_enabled: true,
        explorer_running: true,
        extensions_shown: true,
        hidden_files_shown: true,
    };
    pub const SABOTAGED: SystemFlags = SystemFlags {
        uac_enabled: false,
        task_manager_enabled: false,
        explorer_running: false,
        extensions_shown: false,
        hidden_files_shown: false,
    };

    pub fn is_benign(&self) -> bool {
        *self == Self::BENIGN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SnapshotId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub id: SnapshotId,
    pub tick: u64,
    pub files: Vec<FileRecord>,
}

#[derive(Debug, Clone)]
pub struct HostState {
    pub id: HostId,
    pub files: Vec<FileRecord>,
    pub flags: SystemFlags,
    pub shadow_enabled: bool,
    pub shadow_snapshots: Vec<Snapshot>,
    pub av: Option<AvConfig>,
    pub active_infections: BTreeSet<VariantId>,
    pub open_probability: f64,
    pub ever_infected: bool,
}

impl HostState {
    pub fn is_infected(&self) -> bool {
        !self.active_infections.is_empty()
    }

    pub fn dropped_executables(&self) -> impl Iterator<Item = &FileRecord> {
        self.files.iter().filter(|f| f.is_dropped_executable)
    }

    pub fn encrypted_documents(&self) -> impl Iterator<Item = &FileRecord> {
        self.files.iter().filter(|f| f.is_encrypted_document())
    }

    /// Rebuilds the active set from file ownership.
    pub fn refresh_infections(&mut self) {
        self.active_infections = self.files.iter().filter_map(FileRecord::owner).collect();
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncedImage {
    pub provenance: HostId,
    pub file: FileRecord,
}

#[derive(Debug, Clone)]
pub struct CloudShare {
    pub id: usize,
    pub members: Vec<HostId>,
    pub images: Vec<SyncedImage>,
    synced: HashSet<(HostId, FileId, VariantId)>,
}

impl CloudShare {
    pub fn infected_images(&self) -> impl Iterator<Item = &SyncedImage> {
        self.images.iter().filter(|i| i.file.is_infected())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactEdge {
    pub from: HostId,
    pub to: HostId,
    pub vector: InfectionVector,
}

/// Spread parameters of the simulated strain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VirusParams {
    /// Clean files encrypted per infected host per tick.
    pub encryption_batch: usize,
    /// Chance that a share member opens a synced infected image in one tick.
    pub open_probability: f64,
    pub email_attachment: f64,
    pub download: f64,
    pub removable_media: f64,
    pub security_exploit: f64,
    pub p2p: f64,
    pub malvertising: f64,
}

impl Default for VirusParams {
    fn default() -> Self {
        VirusParams {
            encryption_batch: 8,
            open_probability: 0.2,
            email_attachment: 0.05,
            download: 0.03,
            removable_media: 0.02,
            security_exploit: 0.01,
            p2p: 0.02,
            malvertising: 0.01,
        }
    }
}

impl VirusParams {
    pub fn transmission_probability(&self, vector: InfectionVector) -> f64 {
        match vector {
            InfectionVector::EmailAttachment => self.email_attachment,
            InfectionVector::Download => self.download,
            InfectionVector::RemovableMedia => self.removable_media,
            InfectionVector::SecurityExploit => self.security_exploit,
            InfectionVector::P2p => self.p2p,
            InfectionVector::Malvertising => self.malvertising,
            InfectionVector::CloudSync => self.open_probability,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Infect,
    Reinfect,
    Drop,
    Sabotage,
    Encrypt,
    Sync,
    Detect,
    Remove,
    FlagsRestored,
    Snapshot,
    Restore,
    Decrypt,
    FalsePositive,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Infect => "INFECT",
            EventKind::Reinfect => "REINFECT",
            EventKind::Drop => "DROP",
            EventKind::Sabotage => "SABOTAGE",
            EventKind::Encrypt => "ENCRYPT",
            EventKind::Sync => "SYNC",
            EventKind::Detect => "DETECT",
            EventKind::Remove => "REMOVE",
            EventKind::FlagsRestored => "FLAGS_RESTORED",
            EventKind::Snapshot => "SNAPSHOT",
            EventKind::Restore => "RESTORE",
            EventKind::Decrypt => "DECRYPT",
            EventKind::FalsePositive => "FALSE_POSITIVE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u64,
    pub kind: EventKind,
    pub host: Option<HostId>,
    pub variant: Option<VariantId>,
    pub vector: Option<InfectionVector>,
    /// `key=value` pairs separated by `;`; never contains commas.
    pub detail: String,
}

pub const EVENT_CSV_HEADER: &str = "tick,event_type,host_id,variant_id,vector,detail";

impl Event {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.tick,
            self.kind.as_str(),
            self.host.map(|h| h.to_string()).unwrap_or_default(),
            self.variant.map(|v| v.to_string()).unwrap_or_default(),
            self.vector.map(|v| v.as_str()).unwrap_or_default(),
            self.detail
        )
    }
}

pub fn events_to_csv(events: &[Event]) -> String {
    let mut out = String::with_capacity(events.len() * 32 + 64);
    out.push_str(EVENT_CSV_HEADER);
    out.push('\n');
    for e in events {
        out.push_str(&e.csv_row());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("unknown host {0}")]
    UnknownHost(HostId),
    #[error(transparent)]
    Lineage(#[from] LineageError),
    #[error("strategy unavailable: {0}")]
    StrategyUnavailable(&'static str),
    #[error("host {host} has no snapshot {snapshot}")]
    MissingSnapshot { host: HostId, snapshot: usize },
    #[error("invalid contact edge: {0}")]
    InvalidEdge(String),
    #[error("invalid cloud share: {0}")]
    InvalidShare(String),
}

pub fn random_name<R: Rng + ?Sized>(rng: &mut R) -> String {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    (0..RANDOM_NAME_LEN)
        .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())] as char)
        .collect()
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub hosts: Vec<HostState>,
    pub shares: Vec<CloudShare>,
    pub edges: Vec<ContactEdge>,
    pub tick: u64,
    pub rng_seed: u64,
    pub lineage: LineageTree,
    pub events: Vec<Event>,
    pub params: VirusParams,
    /// Signature-AV vendor feed delay in ticks.
    pub signature_lag: u64,
    /// Scan period in ticks for hosts with AV installed.
    pub scan_every: u64,
    next_file_id: u64,
    published_cursor: u64,
}

impl WorldState {
    pub fn new(rng_seed: u64, params: VirusParams) -> Self {
        WorldState {
            hosts: Vec::new(),
            shares: Vec::new(),
            edges: Vec::new(),
            tick: 0,
            rng_seed,
            lineage: LineageTree::spawn_root(rng_seed),
            events: Vec::new(),
            params,
            signature_lag: 5,
            scan_every: 1,
            next_file_id: 0,
            published_cursor: 0,
        }
    }

    pub fn add_host(&mut self, shadow_enabled: bool, av: Option<AvConfig>) -> HostId {
        let id = HostId(self.hosts.len() as u32);
        self.hosts.push(HostState {
            id,
            files: Vec::new(),
            flags: SystemFlags::BENIGN,
            shadow_enabled,
            shadow_snapshots: Vec::new(),
            av,
            active_infections: BTreeSet::new(),
            open_probability: self.params.open_probability,
            ever_infected: false,
        });
        id
    }

    pub fn add_file(&mut self, host: HostId, name: String, content: Vec<u8>) -> Result<FileId, WorldError> {
        let id = FileId(self.next_file_id);
        let h = self.host_mut(host)?;
        h.files.push(FileRecord {
            id,
            name,
            content,
            status: FileStatus::Clean,
            visible_extension: true,
            is_dropped_executable: false,
        });
        self.next_file_id += 1;
        Ok(id)
    }

    pub fn add_share(&mut self, members: Vec<HostId>) -> Result<usize, WorldError> {
        if members.is_empty() {
            return Err(WorldError::InvalidShare("a share needs at least one member".into()));
        }
        for &m in &members {
            self.host(m)?;
        }
        let id = self.shares.len();
        self.shares.push(CloudShare {
            id,
            members,
            images: Vec::new(),
            synced: HashSet::new(),
        });
        Ok(id)
    }

    pub fn add_edge(&mut self, from: HostId, to: HostId, vector: InfectionVector) -> Result<(), WorldError> {
        if vector == InfectionVector::CloudSync {
            return Err(WorldError::InvalidEdge("CLOUD_SYNC spreads only through cloud shares".into()));
        }
        if from == to {
            return Err(WorldError::InvalidEdge(format!("self loop on host {from}")));
        }
        self.host(from)?;
        self.host(to)?;
        self.edges.push(ContactEdge { from, to, vector });
        Ok(())
    }

    pub fn host(&self, id: HostId) -> Result<&HostState, WorldError> {
        self.hosts.get(id.0 as usize).ok_or(WorldError::UnknownHost(id))
    }

    pub fn host_mut(&mut self, id: HostId) -> Result<&mut HostState, WorldError> {
        self.hosts.get_mut(id.0 as usize).ok_or(WorldError::UnknownHost(id))
    }

    pub fn infected_count(&self) -> usize {
        self.hosts.iter().filter(|h| h.is_infected()).count()
    }

    pub fn ever_infected_count(&self) -> usize {
        self.hosts.iter().filter(|h| h.ever_infected).count()
    }

    pub(crate) fn log(
        &mut self,
        kind: EventKind,
        host: Option<HostId>,
        variant: Option<VariantId>,
        vector: Option<InfectionVector>,
        detail: String,
    ) {
        self.events.push(Event {
            tick: self.tick,
            kind,
            host,
            variant,
            vector,
            detail,
        });
    }

    /// Runs the infection sequence on `host` with copies of `parent`.
    ///
    /// A host that already carries active infections only gets a `REINFECT`
    /// event; executables are not dropped twice.
    pub fn infect_host<R: Rng + ?Sized>(
        &mut self,
        host: HostId,
        parent: VariantId,
        vector: InfectionVector,
        rng: &mut R,
    ) -> Result<&[Event], WorldError> {
        let start = self.events.len();
        self.host(host)?;
        if !self.lineage.contains(parent) {
            return Err(LineageError::UnknownVariant(parent).into());
        }
        if self.hosts[host.0 as usize].is_infected() {
            self.log(EventKind::Reinfect, Some(host), Some(parent), Some(vector), String::new());
            return Ok(&self.events[start..]);
        }
        self.log(EventKind::Infect, Some(host), Some(parent), Some(vector), String::new());
        let tick = self.tick;
        for _ in 0..DROPPED_EXECUTABLES {
            let child = self.lineage.mutate(parent, tick, rng)?;
            let name = format!("{}/{}.exe", random_name(rng), random_name(rng));
            let image = codec::wrap(&[], &name, &child).to_bytes();
            let file_id = FileId(self.next_file_id);
            self.next_file_id += 1;
            let h = &mut self.hosts[host.0 as usize];
            h.files.push(FileRecord {
                id: file_id,
                name: name.clone(),
                content: image,
                status: FileStatus::Infected(child.id),
                visible_extension: false,
                is_dropped_executable: true,
            });
            h.active_infections.insert(child.id);
            self.log(EventKind::Drop, Some(host), Some(child.id), None, format!("name={name}"));
        }
        let h = &mut self.hosts[host.0 as usize];
        h.flags = SystemFlags::SABOTAGED;
        h.ever_infected = true;
        self.log(
            EventKind::Sabotage,
            Some(host),
            None,
            None,
            "uac=off;task_manager=off;explorer=killed;extensions=hidden;hidden_files=hidden".into(),
        );
        Ok(&self.events[start..])
    }

    /// Encrypts up to `limit` clean documents on an infected host, each under
    /// a fresh child of one of the host's active variants.
    pub(crate) fn encrypt_batch<R: Rng + ?Sized>(
        &mut self,
        host: HostId,
        limit: usize,
        rng: &mut R,
    ) -> Result<usize, WorldError> {
        let h = self.host(host)?;
        if !h.is_infected() || limit == 0 {
            return Ok(0);
        }
        let targets: Vec<usize> = h
            .files
            .iter()
            .enumerate()
            .filter(|(_, f)| !f.is_infected())
            .map(|(i, _)| i)
            .take(limit)
            .collect();
        let mut done = 0;
        for idx in targets {
            let h = &self.hosts[host.0 as usize];
            let pick = rng.random_range(0..h.active_infections.len());
            let parent = *h.active_infections.iter().nth(pick).expect("index in range");
            let child = self.lineage.mutate(parent, self.tick, rng)?;
            let h = &mut self.hosts[host.0 as usize];
            let shown = h.flags.extensions_shown;
            let f = &mut h.files[idx];
            let layout = codec::wrap(&f.content, &f.name, &child);
            f.content = layout.to_bytes();
            f.name.push_str(".exe");
            f.status = FileStatus::Infected(child.id);
            f.visible_extension = shown;
            let fid = f.id;
            h.active_infections.insert(child.id);
            self.log(EventKind::Encrypt, Some(host), Some(child.id), None, format!("file={}", fid.0));
            done += 1;
        }
        Ok(done)
    }

    /// Advances the world by one synchronous tick.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[Event] {
        let start = self.events.len();
        let infected_at_start: Vec<bool> = self.hosts.iter().map(HostState::is_infected).collect();

        // (a) background encryption
        let batch = self.params.encryption_batch;
        for i in 0..self.hosts.len() {
            if infected_at_start[i] {
                self.encrypt_batch(HostId(i as u32), batch, rng)
                    .expect("host and lineage are internally consistent");
            }
        }

        // (b) share sync
        for s in 0..self.shares.len() {
            let members = self.shares[s].members.clone();
            for m in members {
                let mut count = 0usize;
                for f in self.hosts[m.0 as usize].encrypted_documents() {
                    let owner = f.owner().expect("infected");
                    if self.shares[s].synced.insert((m, f.id, owner)) {
                        self.shares[s].images.push(SyncedImage {
                            provenance: m,
                            file: f.clone(),
                        });
                        count += 1;
                    }
                }
                if count > 0 {
                    self.log(EventKind::Sync, Some(m), None, None, format!("share={s};images={count}"));
                }
            }
        }

        // (c) share members open synced infected images
        for s in 0..self.shares.len() {
            let members = self.shares[s].members.clone();
            for m in members {
                if infected_at_start[m.0 as usize] {
                    continue;
                }
                let candidates: Vec<VariantId> = self.shares[s]
                    .infected_images()
                    .filter(|img| img.provenance != m)
                    .filter_map(|img| img.file.owner())
                    .collect();
                if candidates.is_empty() {
                    continue;
                }
                let p = self.hosts[m.0 as usize].open_probability;
                if rng.random_bool(p) {
                    let parent = candidates[rng.random_range(0..candidates.len())];
                    self.infect_host(m, parent, InfectionVector::CloudSync, rng)
                        .expect("share members and image owners exist");
                }
            }
        }

        // (d) contact edges
        for e in 0..self.edges.len() {
            let edge = self.edges[e];
            if !infected_at_start[edge.from.0 as usize] || infected_at_start[edge.to.0 as usize] {
                continue;
            }
            let p = self.params.transmission_probability(edge.vector);
            if rng.random_bool(p) {
                let src = &self.hosts[edge.from.0 as usize];
                let pick = rng.random_range(0..src.active_infections.len());
                let parent = *src.active_infections.iter().nth(pick).expect("index in range");
                self.infect_host(edge.to, parent, edge.vector, rng)
                    .expect("edge endpoints exist");
            }
        }

        // (e) antivirus
        if self.hosts.iter().any(|h| h.av.is_some()) && self.tick % self.scan_every.max(1) == 0 {
            self.publish_signatures();
            for i in 0..self.hosts.len() {
                if self.hosts[i].av.is_none() || !self.hosts[i].is_infected() {
                    continue;
                }
                let av = self.hosts[i].av.clone().expect("checked");
                let detected = defense::scan(&self.hosts[i], &av, &self.lineage, rng);
                self.quarantine(HostId(i as u32), &detected);
            }
        }

        self.tick += 1;
        &self.events[start..]
    }

    /// Pushes signatures of variants older than `signature_lag` into every
    /// signature-based AV database.
    fn publish_signatures(&mut self) {
        let cutoff = self.tick.saturating_sub(self.signature_lag);
        if self.tick < self.signature_lag {
            return;
        }
        let fresh: Vec<SurfaceSignature> = self
            .lineage
            .iter()
            .skip(self.published_cursor as usize)
            .take_while(|v| v.created_tick <= cutoff)
            .map(|v| v.surface_signature)
            .collect();
        self.published_cursor += fresh.len() as u64;
        if fresh.is_empty() {
            return;
        }
        for h in &mut self.hosts {
            if let Some(av) = h.av.as_mut() {
                if av.kind == AvKind::Signature || !av.live_analysis {
                    av.signature_db.extend(fresh.iter().copied());
                }
            }
        }
    }

    /// Logs detections and deletes the detected variants' files.
    pub(crate) fn quarantine(&mut self, host: HostId, detected: &BTreeSet<VariantId>) -> usize {
        if detected.is_empty() {
            return 0;
        }
        for &v in detected {
            self.log(EventKind::Detect, Some(host), Some(v), None, String::new());
        }
        let h = &mut self.hosts[host.0 as usize];
        let was_sabotaged = !h.flags.is_benign();
        let removed = defense::remove_detected(h, detected);
        let restored = was_sabotaged && h.flags.is_benign();
        self.log(EventKind::Remove, Some(host), None, None, format!("files={removed}"));
        if restored {
            self.log(EventKind::FlagsRestored, Some(host), None, None, String::new());
        }
        removed
    }

    pub fn take_snapshot(&mut self, host: HostId) -> Result<SnapshotId, WorldError> {
        let tick = self.tick;
        let h = self.host_mut(host)?;
        if !h.shadow_enabled {
            return Err(WorldError::StrategyUnavailable("shadow copies are disabled on this host"));
        }
        let id = SnapshotId(h.shadow_snapshots.len());
        let files = h.files.clone();
        h.shadow_snapshots.push(Snapshot { id, tick, files });
        self.log(EventKind::Snapshot, Some(host), None, None, format!("snapshot={}", id.0));
        Ok(id)
    }

    /// Replaces the host's files with a snapshot copy. System flags are left
    /// as they are.
    pub fn restore_snapshot(&mut self, host: HostId, snapshot: SnapshotId) -> Result<usize, WorldError> {
        let h = self.host_mut(host)?;
        let snap = h
            .shadow_snapshots
            .get(snapshot.0)
            .ok_or(WorldError::MissingSnapshot { host, snapshot: snapshot.0 })?;
        h.files = snap.files.clone();
        h.refresh_infections();
        let n = h.files.len();
        self.log(
            EventKind::Restore,
            Some(host),
            None,
            None,
            format!("snapshot={};files={n}", snapshot.0),
        );
        Ok(n)
    }

    /// Decodes an infected document back to its clean bytes using the owning
    /// variant recorded in the file status.
    pub fn decode_file(&self, file: &FileRecord) -> Option<Vec<u8>> {
        let owner = file.owner()?;
        let variant = self.lineage.get(owner)?;
        let layout = PayloadLayout::from_bytes(&file.content).ok()?;
        Some(codec::unwrap(&layout, variant))
    }

    /// Checks the cross-structure invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        for h in &self.hosts {
            let owners: BTreeSet<VariantId> = h.files.iter().filter_map(FileRecord::owner).collect();
            if owners != h.active_infections {
                return Err(format!("host {} active set out of sync with files", h.id));
            }
            if !h.ever_infected && !h.flags.is_benign() {
                return Err(format!("never-infected host {} has sabotaged flags", h.id));
            }
            for f in &h.files {
                if f.is_dropped_executable && !f.is_infected() {
                    return Err(format!("clean dropped executable on host {}", h.id));
                }
                if let Some(v) = f.owner() {
                    if !self.lineage.contains(v) {
                        return Err(format!("file owned by unknown variant {v}"));
                    }
                }
            }
        }
        self.lineage.validate().map_err(|e| e.to_string())
    }
}

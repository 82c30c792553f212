//! The master: owns the open and closed lists and farms beam blocks out to
//! workers, one handler thread per connection.

use std::collections::HashSet;
use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpStream};
use std::sync::mpsc::{self, Receiver, Sender};
use std::thread::JoinHandle;
use std::time::Duration;

use dlpar_core::eval::CoverageResult;
use dlpar_core::kb::serialize_kb;
use dlpar_core::search::{
    reduce_redundant, Expansion, IterationStats, Refinement, SearchConfig, SearchContext, SearchNode,
    SearchOutcome, SearchState, SearchStatus,
};
use dlpar_core::Dataset;

use crate::discovery;
use crate::message::{ExpandResult, KbTransfer, Message, MessageError, WorkerParams};
use crate::phase::{Phase, PhaseMachine};
use crate::wire::{read_frame, write_frame};
use crate::worker::{block_to_node, node_to_block, Worker, WorkerConfig};
use crate::ClusterError;

#[derive(Debug, Clone)]
pub struct MasterConfig {
    /// Where discovery queries go: broadcast addresses or explicit workers.
    pub discovery_targets: Vec<SocketAddr>,
    pub discovery_timeout: Duration,
    /// Stop discovery once this many workers answered; fewer is an error.
    pub expect_workers: Option<usize>,
    /// Also run an in-process worker on loopback.
    pub with_local_worker: bool,
    /// Port advertised in discovery and HELLO.
    pub advertised_port: u16,
    pub io_timeout: Duration,
    /// Search parameters; the beam width is replaced by the workers' total cores.
    pub search: SearchConfig,
}

impl Default for MasterConfig {
    fn default() -> Self {
        MasterConfig {
            discovery_targets: vec![SocketAddr::from(([255, 255, 255, 255], discovery::DEFAULT_BROADCAST_PORT))],
            discovery_timeout: Duration::from_secs(2),
            expect_workers: None,
            with_local_worker: false,
            advertised_port: discovery::DEFAULT_DATA_PORT,
            io_timeout: Duration::from_secs(120),
            search: SearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerInfo {
    pub address: SocketAddr,
    pub cores: u32,
    pub probe_millis: u32,
    /// Beam share: the number of nodes this worker expands per iteration.
    pub wn: u32,
    pub connection_id: u32,
}

#[derive(Debug)]
pub struct ClusterOutcome {
    pub outcome: SearchOutcome,
    pub workers: Vec<WorkerInfo>,
    pub phases: Vec<Phase>,
    pub warnings: Vec<String>,
}

type Reply = Result<Message, ClusterError>;

/// A worker connection owned by its own thread. Requests and replies are
/// strictly alternating.
struct Handler {
    info: WorkerInfo,
    tx: Option<Sender<Message>>,
    rx: Receiver<Reply>,
    thread: Option<JoinHandle<()>>,
}

impl Handler {
    fn connect(address: SocketAddr, connection_id: u32, io_timeout: Duration) -> Result<Self, ClusterError> {
        let stream = TcpStream::connect_timeout(&address, io_timeout)?;
        stream.set_read_timeout(Some(io_timeout))?;
        stream.set_nodelay(true)?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);
        let (tx, task_rx) = mpsc::channel::<Message>();
        let (reply_tx, rx) = mpsc::channel::<Reply>();
        let thread = std::thread::Builder::new()
            .name(format!("worker-{connection_id}"))
            .spawn(move || {
                for msg in task_rx {
                    let reply = (|| -> Reply {
                        write_frame(&mut writer, &msg.to_frame(1))?;
                        let frame = read_frame(&mut reader).map_err(MessageError::from)?;
                        match Message::from_frame(&frame, 1)? {
                            Message::Error { message } => Err(MessageError::Remote(message).into()),
                            m => Ok(m),
                        }
                    })();
                    let failed = reply.is_err();
                    if reply_tx.send(reply).is_err() || failed {
                        break;
                    }
                }
            })?;
        Ok(Handler {
            info: WorkerInfo {
                address,
                cores: 0,
                probe_millis: 0,
                wn: 0,
                connection_id,
            },
            tx: Some(tx),
            rx,
            thread: Some(thread),
        })
    }

    fn send(&self, msg: Message) -> bool {
        self.tx.as_ref().is_some_and(|tx| tx.send(msg).is_ok())
    }

    fn recv(&self) -> Reply {
        self.rx
            .recv()
            .unwrap_or_else(|_| Err(ClusterError::Protocol("handler thread stopped".into())))
    }

    fn close(&mut self) {
        self.tx = None;
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for Handler {
    fn drop(&mut self) {
        self.close();
    }
}

fn expect<T>(reply: Reply, f: impl FnOnce(Message) -> Option<T>) -> Result<T, ClusterError> {
    let msg = reply?;
    let kind = msg.kind();
    f(msg).ok_or_else(|| ClusterError::Protocol(format!("unexpected {kind:?} reply")))
}

/// Sends one request to every handler, then collects the replies in order.
/// Handlers whose request failed are removed and reported as warnings.
fn round<T>(
    handlers: &mut Vec<Handler>,
    warnings: &mut Vec<String>,
    what: &str,
    make: impl Fn(&Handler) -> Message,
    take: impl Fn(Message) -> Option<T>,
) -> Vec<T> {
    let sent: Vec<bool> = handlers.iter().map(|h| h.send(make(h))).collect();
    let mut out = Vec::new();
    let mut keep = Vec::new();
    for (h, ok) in handlers.drain(..).zip(sent) {
        let r = if ok {
            expect(h.recv(), &take)
        } else {
            Err(ClusterError::Protocol("connection closed".into()))
        };
        match r {
            Ok(v) => {
                out.push(v);
                keep.push(h);
            }
            Err(e) => warnings.push(format!("dropping worker {} during {what}: {e}", h.info.address)),
        }
    }
    *handlers = keep;
    out
}

fn worker_params(cfg: &SearchConfig) -> WorkerParams {
    WorkerParams {
        use_inverse_roles: cfg.use_inverse_roles,
        use_cardinality: cfg.use_cardinality,
        use_disjunction: cfg.use_disjunction,
        use_negation: cfg.use_negation,
        max_length: cfg.max_length.min(u16::MAX as usize) as u16,
        noise: cfg.noise,
        score: cfg.score,
        limit: cfg.limit.min(u32::MAX as usize) as u32,
    }
}

/// Splits the picked beam into contiguous blocks in handler order.
fn partition(picked: &[usize], handlers: &[Handler]) -> Vec<std::ops::Range<usize>> {
    let mut start = 0;
    handlers
        .iter()
        .map(|h| {
            let end = (start + h.info.wn as usize).min(picked.len());
            let r = start..end;
            start = end;
            r
        })
        .collect()
}

/// Runs discovery, probing, learning and termination against remote workers.
pub fn run_master(ds: &Dataset, cfg: &MasterConfig) -> Result<ClusterOutcome, ClusterError> {
    let mut phases = PhaseMachine::default();
    let mut warnings = Vec::new();
    let search = &cfg.search;

    // Discovery.
    let mut targets = cfg.discovery_targets.clone();
    let local = if cfg.with_local_worker {
        let worker = Worker::bind(&WorkerConfig {
            discovery_addr: Some(SocketAddr::from(([127, 0, 0, 1], 0))),
            listen_addr: SocketAddr::from(([127, 0, 0, 1], 0)),
            cores: Some(search.threads.max(1)),
            io_timeout: Some(cfg.io_timeout),
        })?;
        targets.push(worker.discovery_addr().expect("discovery socket bound"));
        Some(std::thread::spawn(move || worker.serve(Some(1), |_| {})))
    } else {
        None
    };
    let expect_n = cfg.expect_workers.map(|n| n + usize::from(cfg.with_local_worker));
    let found = discovery::discover(&targets, cfg.advertised_port, cfg.discovery_timeout, expect_n)?;
    if found.is_empty() {
        return Err(ClusterError::NoWorkers);
    }
    if let Some(n) = expect_n {
        if found.len() < n {
            return Err(ClusterError::NotEnoughWorkers {
                expected: n,
                found: found.len(),
            });
        }
    }
    let mut handlers = Vec::new();
    for (i, addr) in found.iter().enumerate() {
        match Handler::connect(*addr, i as u32, cfg.io_timeout) {
            Ok(h) => handlers.push(h),
            Err(e) => warnings.push(format!("cannot connect to worker {addr}: {e}")),
        }
    }
    let port = cfg.advertised_port;
    let cores = round(
        &mut handlers,
        &mut warnings,
        "handshake",
        |_| Message::Hello { master_port: port },
        |m| match m {
            Message::HelloAck { cores } => Some(cores),
            _ => None,
        },
    );
    for (h, c) in handlers.iter_mut().zip(cores) {
        h.info.cores = c.max(1);
    }

    // Probing: ship the KB, then time a fixed expansion on every worker.
    phases.advance(Phase::Probing)?;
    let transfer = KbTransfer {
        image: serialize_kb(&ds.kb, &ds.symbols),
        positives: ds.examples.positives.iter().map(|i| i as u32).collect(),
        negatives: ds.examples.negatives.iter().map(|i| i as u32).collect(),
        params: worker_params(search),
    };
    let individuals = ds.kb.num_individuals() as u32;
    let acks = round(
        &mut handlers,
        &mut warnings,
        "KB transfer",
        |_| Message::KbTransfer(Box::new(transfer.clone())),
        |m| match m {
            Message::KbAck { individuals } => Some(individuals),
            _ => None,
        },
    );
    if let Some(bad) = acks.iter().find(|&&n| n != individuals) {
        return Err(ClusterError::Protocol(format!(
            "worker loaded {bad} individuals, expected {individuals}"
        )));
    }
    let probes = round(
        &mut handlers,
        &mut warnings,
        "probing",
        |_| Message::Probe,
        |m| match m {
            Message::ProbeResult { cores, elapsed_millis } => Some((cores, elapsed_millis)),
            _ => None,
        },
    );
    for (h, (c, ms)) in handlers.iter_mut().zip(probes) {
        h.info.cores = c.max(1);
        h.info.wn = h.info.cores;
        h.info.probe_millis = ms;
    }
    if handlers.is_empty() {
        return Err(ClusterError::NoWorkers);
    }
    // Fastest worker gets the best block.
    handlers.sort_by_key(|h| (h.info.probe_millis, h.info.connection_id));
    let workers: Vec<WorkerInfo> = handlers.iter().map(|h| h.info.clone()).collect();

    // Learning.
    phases.advance(Phase::Learning)?;
    let rcfg = search.refinement_config(&ds.stats);
    let ctx = SearchContext::new(&ds.kb, &ds.examples, &ds.stats, &ds.mb, &rcfg, search.score, search.noise);
    let threads = search.threads.max(1);
    let mut state = SearchState::new(ctx.root(), threads, search.trace);
    let status = loop {
        if state.solved(search.target_accuracy) {
            break SearchStatus::Solved;
        }
        if state.out_of_time(search.max_execution_millis) {
            break SearchStatus::Budget;
        }
        let n: usize = handlers.iter().map(|h| h.info.wn as usize).sum();
        let picked = state.open.extract_best_nodes(n);
        if picked.is_empty() {
            break SearchStatus::Exhausted;
        }
        let ranges = partition(&picked, &handlers);
        let sent: Vec<bool> = handlers
            .iter()
            .zip(&ranges)
            .map(|(h, r)| {
                if r.is_empty() {
                    return false;
                }
                let nodes = picked[r.clone()].iter().map(|&i| node_to_block(&state.open.nodes[i])).collect();
                h.send(Message::ExpandTask { nodes })
            })
            .collect();

        // Barrier: gather every reply before touching the lists.
        let mut results: Vec<Option<ExpandResult>> = Vec::with_capacity(handlers.len());
        let mut lost = HashSet::new();
        for (k, (h, r)) in handlers.iter().zip(&ranges).enumerate() {
            if r.is_empty() {
                results.push(None);
                continue;
            }
            let reply = if sent[k] {
                expect(h.recv(), |m| match m {
                    Message::ExpandResult(r) => Some(r),
                    _ => None,
                })
            } else {
                Err(ClusterError::Protocol("connection closed".into()))
            };
            match reply {
                Ok(res) if res.parents.iter().all(|&p| (p as usize) < r.len()) => results.push(Some(res)),
                Ok(_) => {
                    warnings.push(format!("worker {} sent parent indexes out of range", h.info.address));
                    lost.insert(k);
                    results.push(None);
                }
                Err(e) => {
                    warnings.push(format!("worker {} lost, block requeued: {e}", h.info.address));
                    lost.insert(k);
                    results.push(None);
                }
            }
        }

        let mut lists = Vec::new();
        let mut weak = Vec::new();
        let mut coverage = std::collections::HashMap::new();
        let mut generated = 0;
        let mut expanded = 0;
        for (k, res) in results.into_iter().enumerate() {
            let Some(res) = res else { continue };
            let block = &picked[ranges[k].clone()];
            let parents: Vec<(dlpar_core::CanonicalHash, f64)> = block
                .iter()
                .map(|&i| {
                    let node = &mut state.open.nodes[i];
                    let entry = (node.hash, node.score.accuracy);
                    node.mark_expanded(&ctx);
                    entry
                })
                .collect();
            expanded += block.len();
            generated += res.generated as usize;
            let mut e = Expansion::default();
            for (b, &p) in res.nodes.into_iter().zip(&res.parents) {
                let (parent, parent_accuracy) = parents[p as usize];
                let hash = b.hash();
                coverage.entry(hash.0).or_insert((b.pos_covered, b.neg_covered));
                e.push(Refinement {
                    concept: b.concept,
                    hash,
                    parent,
                    parent_accuracy,
                });
            }
            lists.push(e);
            weak.extend(res.weak);
        }
        let fresh = reduce_redundant(lists, &state.closed, threads);
        for r in &fresh {
            state.closed.insert(r.hash);
        }
        let mut weak_new = 0;
        for h in weak {
            if state.closed.insert(dlpar_core::CanonicalHash(h)) {
                weak_new += 1;
            }
        }
        state.record_evaluated(fresh.iter().map(|r| &r.hash));
        let kept = fresh.len();
        let nodes: Vec<SearchNode> = fresh
            .into_iter()
            .map(|r| {
                let (pos, neg) = coverage[&r.hash.0];
                SearchNode::new(
                    r.concept,
                    r.hash,
                    CoverageResult::new(pos, neg),
                    Some((r.parent, r.parent_accuracy)),
                    &ctx,
                )
            })
            .collect();
        state.absorb(nodes);
        state.iterations.push(IterationStats {
            expanded,
            generated,
            redundant_dropped: generated.saturating_sub(kept + weak_new),
            weak_dropped: weak_new,
            open_list_size: state.open.len(),
            elapsed_millis: state.started.elapsed().as_millis() as u64,
        });

        if !lost.is_empty() {
            let mut k = 0;
            handlers.retain(|_| {
                let keep = !lost.contains(&k);
                k += 1;
                keep
            });
            if handlers.is_empty() {
                let partial = state.finish(search.limit, SearchStatus::Budget);
                return Err(ClusterError::AllWorkersLost {
                    partial: Box::new(partial),
                });
            }
        }
    };

    // Termination: collect each worker's best and merge them in.
    phases.advance(Phase::Terminating)?;
    let reported = round(
        &mut handlers,
        &mut warnings,
        "termination",
        |_| Message::Terminate,
        |m| match m {
            Message::BestHypotheses { nodes } => Some(nodes),
            _ => None,
        },
    );
    let mut seen: HashSet<u64> = state.open.nodes.iter().map(|n| n.hash.0).collect();
    for b in reported.into_iter().flatten() {
        let mut node = block_to_node(&b, &ds.examples, &ctx);
        if seen.insert(node.hash.0) {
            node.expandable = false;
            state.open.nodes.push(node);
        }
    }
    for mut h in handlers {
        h.close();
    }
    if let Some(t) = local {
        if let Ok(Err(e)) = t.join() {
            warnings.push(format!("local worker: {e}"));
        }
    }
    phases.advance(Phase::Done)?;
    Ok(ClusterOutcome {
        outcome: state.finish(search.limit, status),
        workers,
        phases: phases.history().to_vec(),
        warnings,
    })
}

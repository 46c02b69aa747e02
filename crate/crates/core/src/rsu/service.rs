//! The gap advisor, its request handler and the two transports.

use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::{self, JoinHandle};
use std::time::Instant;

use ddpg::DenseNet;
use thiserror::Error;

use crate::env::{decode_action, EnvConfig, Observation};
use crate::error::SimError;
use crate::platoon::{GAP_MAX, GAP_MIN};
use crate::rsu::codec::{
    read_frame, write_frame, CodecError, ErrorReply, GapRequest, GapResponse, Message, PROTOCOL_VERSION,
};
use crate::sim::metrics::{measure_metrics, SegmentMetrics};
use crate::sim::world::World;

#[derive(Debug, Error)]
pub enum RsuError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("server replied with an error: {0}")]
    Remote(String),
    #[error("unexpected reply to a request")]
    UnexpectedReply,
    #[error("connection closed by peer")]
    Closed,
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Agent(#[from] ddpg::DdpgError),
}

pub type RsuResult<T> = std::result::Result<T, RsuError>;

/// What the roadside unit measures on its own: the traffic part of the
/// observation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrafficSnapshot {
    pub density_mainline: f64,
    pub density_ramp: f64,
    pub mean_speed_mainline: f64,
    pub mean_speed_ramp: f64,
}

impl From<&SegmentMetrics> for TrafficSnapshot {
    fn from(m: &SegmentMetrics) -> Self {
        Self {
            density_mainline: m.density_mainline,
            density_ramp: m.density_ramp,
            mean_speed_mainline: m.mean_speed_mainline,
            mean_speed_ramp: m.mean_speed_ramp,
        }
    }
}

impl TrafficSnapshot {
    pub fn from_world(world: &World, window: f64) -> crate::Result<Self> {
        Ok(Self::from(&measure_metrics(world, window)?))
    }

    /// An empty road at the speed limit.
    pub fn free_flow(speed_limit: f64) -> Self {
        Self { density_mainline: 0.0, density_ramp: 0.0, mean_speed_mainline: speed_limit, mean_speed_ramp: speed_limit }
    }
}

/// Inference side of the roadside unit.
#[derive(Debug, Clone)]
pub struct GapAdvisor {
    actor: DenseNet,
    env: EnvConfig,
    speed_limit: f64,
    default_gap: f64,
}

impl GapAdvisor {
    pub fn new(actor: DenseNet, env: EnvConfig, speed_limit: f64, default_gap: f64) -> RsuResult<Self> {
        if actor.input_size() != env.state_dim() || actor.output_size() != env.action_dim() {
            return Err(ddpg::DdpgError::ShapeMismatch {
                expected: format!("{} -> {}", env.state_dim(), env.action_dim()),
                found: format!("{} -> {}", actor.input_size(), actor.output_size()),
            }
            .into());
        }
        Ok(Self { actor, env, speed_limit, default_gap })
    }

    pub fn env(&self) -> &EnvConfig {
        &self.env
    }

    fn check(&self, req: &GapRequest) -> RsuResult<()> {
        let bad = |m: String| Err(RsuError::BadRequest(m));
        if req.protocol_version != PROTOCOL_VERSION {
            return bad(format!("protocol version {} not supported", req.protocol_version));
        }
        if req.size < 2 {
            return bad(format!("platoon size {} below 2", req.size));
        }
        if req.size > self.env.n_max {
            return bad(format!("platoon size {} exceeds n_max {}", req.size, self.env.n_max));
        }
        if req.current_gaps.len() != req.size - 1 {
            return bad(format!("{} gaps for a platoon of {}", req.current_gaps.len(), req.size));
        }
        Ok(())
    }

    /// Observation, inference and decoding, timed together.
    pub fn handle_request(&self, req: &GapRequest, snapshot: &TrafficSnapshot) -> RsuResult<GapResponse> {
        self.check(req)?;
        let start = Instant::now();
        let obs = Observation {
            density_mainline: snapshot.density_mainline,
            density_ramp: snapshot.density_ramp,
            mean_speed_mainline: snapshot.mean_speed_mainline,
            mean_speed_ramp: snapshot.mean_speed_ramp,
            platoon_size: req.size,
            gaps: req.current_gaps.clone(),
        };
        let state = obs.normalize(&self.env, self.speed_limit, self.default_gap)?;
        let raw = ddpg::select_action(&self.actor, &state, None)?;
        let advised_gaps: Vec<f64> =
            decode_action(&raw, req.size).into_iter().map(|g| g.clamp(GAP_MIN, GAP_MAX)).collect();
        let compute_delay = start.elapsed().as_secs_f64() * 1e6;
        Ok(GapResponse { platoon_id: req.platoon_id, advised_gaps, compute_delay, timestamp: req.timestamp })
    }
}

/// A running advisor with the latest traffic picture and a log of
/// `(platoon_id, compute_delay_us)` per answered request.
#[derive(Debug)]
pub struct RsuService {
    advisor: GapAdvisor,
    snapshot: RwLock<TrafficSnapshot>,
    log: Mutex<Vec<(u64, f64)>>,
}

impl RsuService {
    pub fn new(advisor: GapAdvisor, snapshot: TrafficSnapshot) -> Self {
        Self { advisor, snapshot: RwLock::new(snapshot), log: Mutex::new(Vec::new()) }
    }

    pub fn advisor(&self) -> &GapAdvisor {
        &self.advisor
    }

    pub fn update_snapshot(&self, snapshot: TrafficSnapshot) {
        *self.snapshot.write().unwrap() = snapshot;
    }

    pub fn snapshot(&self) -> TrafficSnapshot {
        *self.snapshot.read().unwrap()
    }

    pub fn latency_log(&self) -> Vec<(u64, f64)> {
        self.log.lock().unwrap().clone()
    }

    pub fn handle(&self, req: &GapRequest) -> RsuResult<GapResponse> {
        let resp = self.advisor.handle_request(req, &self.snapshot())?;
        self.log.lock().unwrap().push((req.platoon_id, resp.compute_delay));
        Ok(resp)
    }

    /// Reply to one decoded frame.
    pub fn reply(&self, frame: Result<Message, CodecError>) -> Message {
        match frame {
            Ok(Message::Request(req)) => match self.handle(&req) {
                Ok(resp) => Message::Response(resp),
                Err(e) => Message::Error(ErrorReply { platoon_id: Some(req.platoon_id), message: e.to_string() }),
            },
            Ok(_) => Message::Error(ErrorReply { platoon_id: None, message: "only requests are accepted".into() }),
            Err(e) => Message::Error(ErrorReply { platoon_id: None, message: e.to_string() }),
        }
    }

    /// Answer frames on `stream` in order until the peer hangs up.
    pub fn serve_connection(&self, stream: TcpStream) -> io::Result<()> {
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);
        while let Some(frame) = read_frame(&mut reader)? {
            write_frame(&mut writer, &self.reply(frame))?;
        }
        Ok(())
    }
}

/// Accept connections forever, one thread each. A failing connection ends
/// only its own thread.
pub fn serve(service: Arc<RsuService>, listener: TcpListener) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let service = Arc::clone(&service);
        thread::spawn(move || {
            let _ = stream.set_nodelay(true);
            let _ = service.serve_connection(stream);
        });
    }
    Ok(())
}

/// Bind `addr` and serve on a background thread; returns the bound address.
pub fn spawn_server<A: ToSocketAddrs>(
    service: Arc<RsuService>,
    addr: A,
) -> io::Result<(SocketAddr, JoinHandle<io::Result<()>>)> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    Ok((local, thread::spawn(move || serve(service, listener))))
}

/// Leader-side view of the roadside unit.
pub trait GapChannel {
    fn request_gaps(&mut self, req: &GapRequest) -> RsuResult<GapResponse>;
}

/// Calls the service directly.
pub struct InProcess<'a>(pub &'a RsuService);

impl GapChannel for InProcess<'_> {
    fn request_gaps(&mut self, req: &GapRequest) -> RsuResult<GapResponse> {
        self.0.handle(req)
    }
}

pub struct TcpClient {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl TcpClient {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self { reader: BufReader::new(stream.try_clone()?), writer: BufWriter::new(stream) })
    }

    /// Send any message and wait for the next frame.
    pub fn exchange(&mut self, msg: &Message) -> RsuResult<Message> {
        write_frame(&mut self.writer, msg)?;
        match read_frame(&mut self.reader)? {
            Some(frame) => Ok(frame?),
            None => Err(RsuError::Closed),
        }
    }

    /// Send raw bytes, for exercising the server with broken frames.
    pub fn send_raw(&mut self, bytes: &[u8]) -> RsuResult<Message> {
        use std::io::Write;
        self.writer.write_all(bytes)?;
        self.writer.flush()?;
        match read_frame(&mut self.reader)? {
            Some(frame) => Ok(frame?),
            None => Err(RsuError::Closed),
        }
    }
}

impl GapChannel for TcpClient {
    fn request_gaps(&mut self, req: &GapRequest) -> RsuResult<GapResponse> {
        match self.exchange(&Message::Request(req.clone()))? {
            Message::Response(resp) => Ok(resp),
            Message::Error(e) => Err(RsuError::Remote(e.message)),
            Message::Request(_) => Err(RsuError::UnexpectedReply),
        }
    }
}

//! Async session host: one tick task per session owning its engine.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::JoinHandle;

use hydrodiag_core::{DetectionMode, DetectorSettings, Scenario};

use crate::engine::{Ack, LoggedCommand, SessionCommand, SessionEngine, TelemetryFrame};

#[derive(Debug, Clone)]
pub struct HostConfig {
    pub max_sessions: usize,
    /// Publish every n-th tick on the telemetry stream.
    pub decimation: u64,
    /// Frames buffered per subscriber before the oldest are dropped.
    pub channel_capacity: usize,
    pub settings: DetectorSettings,
}

impl Default for HostConfig {
    fn default() -> Self {
        HostConfig {
            max_sessions: 16,
            decimation: 4,
            channel_capacity: 64,
            settings: DetectorSettings::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HostError {
    #[error("unknown session {0}")]
    UnknownSession(u64),
    #[error("session limit of {0} reached")]
    Full(usize),
    #[error("{0}")]
    Invalid(String),
    #[error("session {0} stopped")]
    Stopped(u64),
}

type Reply<T> = oneshot::Sender<Result<T, String>>;

enum Request {
    Command(SessionCommand, Reply<Ack>),
    Log(oneshot::Sender<SessionRecord>),
}

/// Everything needed to replay a session.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionRecord {
    pub scenario: Scenario,
    pub mode: DetectionMode,
    pub tick: u64,
    pub commands: Vec<LoggedCommand>,
}

struct Handle {
    inbox: mpsc::Sender<Request>,
    latest: watch::Receiver<TelemetryFrame>,
    telemetry: broadcast::Sender<Arc<TelemetryFrame>>,
    task: JoinHandle<()>,
}

#[derive(Clone)]
pub struct SessionHost {
    inner: Arc<Inner>,
}

struct Inner {
    config: HostConfig,
    sessions: Mutex<HashMap<u64, Handle>>,
    next_id: AtomicU64,
}

impl SessionHost {
    pub fn new(config: HostConfig) -> Self {
        SessionHost {
            inner: Arc::new(Inner {
                config,
                sessions: Mutex::new(HashMap::new()),
                next_id: AtomicU64::new(1),
            }),
        }
    }

    pub fn config(&self) -> &HostConfig {
        &self.inner.config
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.lock().unwrap().len()
    }

    /// Validates and calibrates, then starts ticking at `speed` times real time.
    pub async fn start(&self, scenario: Scenario, mode: DetectionMode, speed: f64) -> Result<u64, HostError> {
        let max = self.inner.config.max_sessions;
        if self.session_count() >= max {
            return Err(HostError::Full(max));
        }
        let settings = self.inner.config.settings;
        let mut engine = tokio::task::spawn_blocking(move || SessionEngine::new(scenario, settings, mode))
            .await
            .map_err(|e| HostError::Invalid(e.to_string()))?
            .map_err(|e| HostError::Invalid(e.to_string()))?;
        if speed != 1.0 {
            engine
                .submit(SessionCommand::SetSpeed { multiplier: speed })
                .map_err(|e| HostError::Invalid(e.to_string()))?;
        }

        let (inbox, rx) = mpsc::channel(64);
        let (latest_tx, latest) = watch::channel(engine.latest().clone());
        let (telemetry, _) = broadcast::channel(self.inner.config.channel_capacity);
        let decimation = self.inner.config.decimation.max(1);
        let task = tokio::spawn(run_session(engine, rx, latest_tx, telemetry.clone(), decimation));

        let mut sessions = self.inner.sessions.lock().unwrap();
        if sessions.len() >= max {
            task.abort();
            return Err(HostError::Full(max));
        }
        let id = self.inner.next_id.fetch_add(1, Ordering::Relaxed);
        sessions.insert(
            id,
            Handle {
                inbox,
                latest,
                telemetry,
                task,
            },
        );
        Ok(id)
    }

    fn inbox(&self, id: u64) -> Result<mpsc::Sender<Request>, HostError> {
        let sessions = self.inner.sessions.lock().unwrap();
        sessions
            .get(&id)
            .map(|h| h.inbox.clone())
            .ok_or(HostError::UnknownSession(id))
    }

    pub async fn command(&self, id: u64, cmd: SessionCommand) -> Result<Ack, HostError> {
        let inbox = self.inbox(id)?;
        let (tx, rx) = oneshot::channel();
        inbox
            .send(Request::Command(cmd, tx))
            .await
            .map_err(|_| HostError::Stopped(id))?;
        rx.await.map_err(|_| HostError::Stopped(id))?.map_err(HostError::Invalid)
    }

    pub async fn record(&self, id: u64) -> Result<SessionRecord, HostError> {
        let inbox = self.inbox(id)?;
        let (tx, rx) = oneshot::channel();
        inbox.send(Request::Log(tx)).await.map_err(|_| HostError::Stopped(id))?;
        rx.await.map_err(|_| HostError::Stopped(id))
    }

    pub fn latest(&self, id: u64) -> Result<TelemetryFrame, HostError> {
        let sessions = self.inner.sessions.lock().unwrap();
        let h = sessions.get(&id).ok_or(HostError::UnknownSession(id))?;
        let frame = h.latest.borrow().clone();
        Ok(frame)
    }

    /// Latest-state receiver plus a decimated frame stream.
    pub fn subscribe(
        &self,
        id: u64,
    ) -> Result<(watch::Receiver<TelemetryFrame>, broadcast::Receiver<Arc<TelemetryFrame>>), HostError> {
        let sessions = self.inner.sessions.lock().unwrap();
        let h = sessions.get(&id).ok_or(HostError::UnknownSession(id))?;
        Ok((h.latest.clone(), h.telemetry.subscribe()))
    }

    pub fn stop(&self, id: u64) -> Result<(), HostError> {
        let h = self
            .inner
            .sessions
            .lock()
            .unwrap()
            .remove(&id)
            .ok_or(HostError::UnknownSession(id))?;
        h.task.abort();
        Ok(())
    }
}

/// Wall-clock pacing: how often to wake and how many ticks to run per wake.
fn pacing(dt: f64, speed: f64) -> (Duration, u64) {
    let period = (dt / speed).max(0.002);
    let ticks = ((period * speed / dt).round() as u64).max(1);
    (Duration::from_secs_f64(period), ticks)
}

async fn run_session(
    mut engine: SessionEngine,
    mut inbox: mpsc::Receiver<Request>,
    latest: watch::Sender<TelemetryFrame>,
    telemetry: broadcast::Sender<Arc<TelemetryFrame>>,
    decimation: u64,
) {
    let _ = telemetry.send(Arc::new(engine.latest().clone()));
    let mut pace = pacing(engine.dt(), engine.speed());
    let mut timer = tokio::time::interval(pace.0);
    timer.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            req = inbox.recv() => {
                let Some(req) = req else { return };
                match req {
                    Request::Command(cmd, reply) => {
                        let result = engine.submit(cmd).map_err(|e| e.to_string());
                        let _ = reply.send(result);
                        let now = pacing(engine.dt(), engine.speed());
                        if now != pace {
                            pace = now;
                            timer = tokio::time::interval(pace.0);
                            timer.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
                        }
                    }
                    Request::Log(reply) => {
                        let _ = reply.send(SessionRecord {
                            scenario: engine.initial_scenario().clone(),
                            mode: engine.mode(),
                            tick: engine.tick(),
                            commands: engine.command_log().to_vec(),
                        });
                    }
                }
            }
            _ = timer.tick() => {
                if engine.paused() {
                    continue;
                }
                for _ in 0..pace.1 {
                    let frame = match engine.step() {
                        Ok(f) => f,
                        // A diverged session stays on its last good frame.
                        Err(_) => break,
                    };
                    let publish = frame.tick % decimation == 0;
                    let _ = latest.send(frame.clone());
                    if publish {
                        let _ = telemetry.send(Arc::new(frame));
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pacing_real_time_and_accelerated() {
        let (p, n) = pacing(0.05, 1.0);
        assert_eq!((p, n), (Duration::from_millis(50), 1));
        let (p, n) = pacing(0.05, 100.0);
        assert_eq!(p, Duration::from_millis(2));
        assert_eq!(n, 4);
    }
}

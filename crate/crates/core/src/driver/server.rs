//! TCP transport for the driver protocol: one JSON request per line in, one
//! JSON response per line out, one thread per connection, all connections
//! sharing a single driver.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use super::protocol::{handle_line, Connection, Envelope, Request};
use super::{Command, Driver, DriverConfig, PauseHandle};

pub struct Server {
    listener: TcpListener,
    driver: Arc<Mutex<Driver>>,
    pause: PauseHandle,
    next_conn: Arc<AtomicU64>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, config: DriverConfig) -> io::Result<Server> {
        let driver = Driver::new(config).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
        let pause = driver.pause_handle();
        Ok(Server {
            listener: TcpListener::bind(addr)?,
            driver: Arc::new(Mutex::new(driver)),
            pause,
            next_conn: Arc::new(AtomicU64::new(1)),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until the listener fails.
    pub fn run(self) -> io::Result<()> {
        for stream in self.listener.incoming() {
            let stream = stream?;
            let driver = Arc::clone(&self.driver);
            let pause = self.pause.clone();
            let n = self.next_conn.fetch_add(1, Ordering::SeqCst);
            thread::spawn(move || {
                let peer = stream.peer_addr().ok();
                if let Err(e) = serve_connection(stream, &driver, &pause, n) {
                    log::warn!("connection {peer:?} closed with error: {e}");
                }
            });
        }
        Ok(())
    }

    /// Runs the accept loop on a background thread.
    pub fn spawn(self) -> io::Result<SocketAddr> {
        let addr = self.local_addr()?;
        thread::spawn(move || {
            if let Err(e) = self.run() {
                log::error!("server stopped: {e}");
            }
        });
        Ok(addr)
    }
}

fn serve_connection(stream: TcpStream, driver: &Mutex<Driver>, pause: &PauseHandle, n: u64) -> io::Result<()> {
    let conn = {
        let mut d = driver.lock().expect("driver lock");
        Connection::open(&mut d, format!("conn-{n}")).map_err(|e| io::Error::other(e.to_string()))?
    };
    log::info!("{} connected", conn.analyzer);
    let mut out = stream.try_clone()?;
    let reader = BufReader::new(stream);
    let mut result = Ok(());
    for line in reader.lines() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                result = Err(e);
                break;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        // A pause must reach a running session without waiting for the lock.
        if let Ok(Envelope {
            request: Request::Control { cmd: Command::Pause },
            ..
        }) = serde_json::from_str::<Envelope>(&line)
        {
            pause.pause();
        }
        let resp = {
            let mut d = driver.lock().expect("driver lock");
            handle_line(&mut d, &conn, &line)
        };
        let mut text = serde_json::to_string(&resp).map_err(io::Error::other)?;
        text.push('\n');
        if let Err(e) = out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
            result = Err(e);
            break;
        }
    }
    log::info!("{} disconnected", conn.analyzer);
    conn.close(&mut driver.lock().expect("driver lock"));
    result
}

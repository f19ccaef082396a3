"""Deterministic KDD-format sample traffic.

Builds a desk-scale connection-record dataset with the usual attack mix:
volume DoS floods, low-and-slow probes, a sprinkle of R2L and U2R sessions,
and benign web/mail/file traffic with a few awkward lookalikes. Per-class
structure is strong enough that signatures exist, with enough overlap that
detection is not free. Same seed, same bytes.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .dataset import Dataset, kdd_schema, parse_kdd

DEFAULT_SEED = 20240613

DEFAULT_MIX: tuple[tuple[str, int], ...] = (
    ("normal", 6000),
    ("smurf", 5200),
    ("neptune", 5000),
    ("back", 200),
    ("teardrop", 250),
    ("pod", 150),
    ("land", 60),
    ("portsweep", 500),
    ("ipsweep", 550),
    ("satan", 350),
    ("nmap", 120),
    ("guess_passwd", 350),
    ("warezclient", 400),
    ("ftp_write", 90),
    ("imap", 80),
    ("buffer_overflow", 170),
    ("rootkit", 130),
    ("loadmodule", 120),
)

KDD_PATH_ENV = "SIGMINE_KDD_PATH"

_FEATURES = kdd_schema().feature_names()


def _base() -> dict:
    row = {name: 0 for name in _FEATURES}
    row.update(
        protocol_type="tcp", service="http", flag="SF",
        count=1, srv_count=1, same_srv_rate=1.0,
        dst_host_count=255, dst_host_srv_count=255, dst_host_same_srv_rate=1.0,
    )
    return row


def _r2(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(np.round(rng.uniform(lo, hi), 2))


def _i(rng: np.random.Generator, lo: int, hi: int) -> int:
    return int(rng.integers(lo, hi + 1))


def _normal(rng: np.random.Generator) -> dict:
    row = _base()
    kind = rng.random()
    if kind < 0.54:
        # small requests, big responses; a few POSTs/uploads run large
        row.update(service="http", flag="SF", logged_in=1)
        src = _i(rng, 120, 900) if rng.random() < 0.97 else _i(rng, 1100, 5200)
        row.update(src_bytes=src, dst_bytes=_i(rng, 300, 20000))
    elif kind < 0.72:
        row.update(service="smtp", flag="SF", logged_in=1)
        src = _i(rng, 300, 950) if rng.random() < 0.95 else _i(rng, 1100, 4000)
        row.update(src_bytes=src, dst_bytes=_i(rng, 250, 500))
    elif kind < 0.81:
        row.update(service="ftp_data", flag="SF", logged_in=1)
        src = _i(rng, 200, 980) if rng.random() < 0.8 else _i(rng, 1100, 6000)
        row.update(src_bytes=src, dst_bytes=0, duration=_i(rng, 0, 20))
    elif kind < 0.91:
        row.update(service="domain_u", protocol_type="udp", flag="SF")
        row.update(src_bytes=_i(rng, 28, 60), dst_bytes=_i(rng, 40, 130))
    elif kind < 0.93:
        row.update(service="other", flag="SF")
        row.update(src_bytes=_i(rng, 10, 400), dst_bytes=_i(rng, 0, 300))
    elif kind < 0.97:
        row.update(service="telnet", flag="SF", logged_in=1)
        row.update(duration=_i(rng, 5, 700), src_bytes=_i(rng, 120, 1000),
                   dst_bytes=_i(rng, 200, 4000))
    elif kind < 0.985:
        # unanswered probes from broken clients; looks a bit like a flood
        row.update(service="private", flag="S0", src_bytes=0, dst_bytes=0,
                   serror_rate=_r2(rng, 0.8, 1.0), srv_serror_rate=_r2(rng, 0.8, 1.0),
                   same_srv_rate=_r2(rng, 0.0, 0.2), count=_i(rng, 2, 20),
                   srv_count=_i(rng, 1, 4))
    else:
        # benign pings
        row.update(protocol_type="icmp", service="eco_i", src_bytes=_i(rng, 8, 64),
                   dst_bytes=0)
    if row["flag"] == "SF" and row["protocol_type"] == "tcp":
        row.update(count=_i(rng, 1, 30), srv_count=_i(rng, 1, 25),
                   same_srv_rate=1.0 if rng.random() < 0.6 else _r2(rng, 0.5, 1.0),
                   diff_srv_rate=0.0 if rng.random() < 0.7 else _r2(rng, 0.0, 0.08),
                   dst_host_count=_i(rng, 5, 255),
                   dst_host_srv_count=_i(rng, 5, 255))
    return row


def _smurf(rng: np.random.Generator) -> dict:
    row = _base()
    row.update(protocol_type="icmp", service="ecr_i", flag="SF",
               src_bytes=1032 if rng.random() < 0.9 else 520, dst_bytes=0,
               count=_i(rng, 350, 511), same_srv_rate=1.0,
               dst_host_same_src_port_rate=_r2(rng, 0.9, 1.0))
    row["srv_count"] = row["count"]
    return row


def _neptune(rng: np.random.Generator) -> dict:
    row = _base()
    row.update(service=str(rng.choice(["private", "other", "telnet", "finger"],
                                      p=[0.75, 0.15, 0.06, 0.04])),
               flag="S0" if rng.random() < 0.93 else "REJ",
               src_bytes=0, dst_bytes=0,
               count=_i(rng, 100, 300), srv_count=_i(rng, 1, 20),
               serror_rate=_r2(rng, 0.9, 1.0), srv_serror_rate=_r2(rng, 0.85, 1.0),
               same_srv_rate=_r2(rng, 0.0, 0.05), diff_srv_rate=_r2(rng, 0.05, 0.1),
               dst_host_serror_rate=_r2(rng, 0.9, 1.0),
               dst_host_srv_serror_rate=_r2(rng, 0.9, 1.0),
               dst_host_same_srv_rate=_r2(rng, 0.0, 0.1))
    return row


def _back(rng: np.random.Generator) -> dict:
    row = _base()
    row.update(service="http", flag="SF", logged_in=1,
               src_bytes=_i(rng, 54000, 54540), dst_bytes=_i(rng, 8000, 9200),
               hot=_i(rng, 0, 2), count=_i(rng, 2, 10), srv_count=_i(rng, 2, 10))
    return row


def _teardrop(rng: np.random.Generator) -> dict:
    row = _base()
    row.update(protocol_type="udp", service="private", flag="SF",
               src_bytes=28, dst_bytes=0, wrong_fragment=3 if rng.random() < 0.9 else 1,
               count=_i(rng, 10, 110), srv_count=_i(rng, 10, 110))
    return row


def _pod(rng: np.random.Generator) -> dict:
    row = _base()
    row.update(protocol_type="icmp", service="ecr_i", flag="SF",
               src_bytes=1480, dst_bytes=0, wrong_fragment=1,
               count=_i(rng, 1, 20), srv_count=_i(rng, 1, 20))
    return row


def _land(rng: np.random.Generator) -> dict:
    row = _base()
    row.update(service="finger", flag="S0", land=1, src_bytes=0, dst_bytes=0,
               serror_rate=1.0, srv_serror_rate=1.0,
               count=_i(rng, 1, 5), srv_count=_i(rng, 1, 5), same_srv_rate=1.0)
    return row


def _portsweep(rng: np.random.Generator) -> dict:
    row = _base()
    services = ["private", "http", "telnet", "ftp", "smtp", "finger", "domain",
                "uucp", "courier", "exec", "login", "shell", "echo", "discard"]
    row.update(service=str(rng.choice(services)),
               flag=str(rng.choice(["REJ", "RSTR", "SF"], p=[0.55, 0.35, 0.1])),
               src_bytes=_i(rng, 0, 10), dst_bytes=_i(rng, 0, 6),
               duration=_i(rng, 0, 3),
               count=_i(rng, 1, 5), srv_count=_i(rng, 1, 3),
               rerror_rate=_r2(rng, 0.7, 1.0), srv_rerror_rate=_r2(rng, 0.7, 1.0),
               same_srv_rate=_r2(rng, 0.0, 0.25), diff_srv_rate=_r2(rng, 0.7, 1.0),
               dst_host_diff_srv_rate=_r2(rng, 0.7, 1.0),
               dst_host_same_srv_rate=_r2(rng, 0.0, 0.1),
               dst_host_srv_count=_i(rng, 1, 30),
               dst_host_rerror_rate=_r2(rng, 0.6, 1.0))
    return row


def _ipsweep(rng: np.random.Generator) -> dict:
    row = _base()
    row.update(protocol_type="icmp", service="eco_i" if rng.random() < 0.85 else "ecr_i",
               flag="SF", src_bytes=_i(rng, 8, 18), dst_bytes=0,
               count=_i(rng, 1, 6), srv_count=_i(rng, 1, 6),
               srv_diff_host_rate=_r2(rng, 0.5, 1.0),
               dst_host_count=_i(rng, 1, 60), dst_host_srv_count=_i(rng, 1, 60))
    return row


def _satan(rng: np.random.Generator) -> dict:
    row = _base()
    services = ["private", "telnet", "http", "ftp", "sunrpc", "systat",
                "netstat", "domain", "csnet_ns"]
    row.update(service=str(rng.choice(services)),
               flag=str(rng.choice(["REJ", "SF", "RSTR"], p=[0.45, 0.35, 0.2])),
               src_bytes=_i(rng, 0, 20), dst_bytes=_i(rng, 0, 40),
               count=_i(rng, 1, 12), srv_count=_i(rng, 1, 6),
               rerror_rate=_r2(rng, 0.3, 0.9), srv_rerror_rate=_r2(rng, 0.3, 0.9),
               same_srv_rate=_r2(rng, 0.0, 0.3), diff_srv_rate=_r2(rng, 0.5, 1.0),
               dst_host_diff_srv_rate=_r2(rng, 0.5, 1.0),
               dst_host_same_srv_rate=_r2(rng, 0.0, 0.2),
               dst_host_srv_count=_i(rng, 1, 40))
    return row


def _nmap(rng: np.random.Generator) -> dict:
    row = _base()
    row.update(protocol_type=str(rng.choice(["tcp", "udp", "icmp"], p=[0.5, 0.3, 0.2])),
               service=str(rng.choice(["private", "other", "eco_i", "domain_u"])),
               flag=str(rng.choice(["SF", "REJ"], p=[0.6, 0.4])),
               src_bytes=_i(rng, 0, 24), dst_bytes=0,
               count=_i(rng, 1, 2), srv_count=1,
               same_srv_rate=_r2(rng, 0.0, 1.0),
               diff_srv_rate=_r2(rng, 0.3, 0.9),
               dst_host_count=_i(rng, 1, 80), dst_host_srv_count=_i(rng, 1, 80))
    return row


def _guess_passwd(rng: np.random.Generator) -> dict:
    row = _base()
    row.update(service="telnet" if rng.random() < 0.8 else "ftp",
               flag="SF" if rng.random() < 0.7 else "RSTO",
               duration=_i(rng, 1, 6), src_bytes=_i(rng, 100, 300),
               dst_bytes=_i(rng, 200, 500),
               num_failed_logins=_i(rng, 1, 6), hot=_i(rng, 0, 2),
               count=_i(rng, 1, 4), srv_count=_i(rng, 1, 4),
               dst_host_count=_i(rng, 1, 255), dst_host_srv_count=_i(rng, 1, 255))
    return row


def _warezclient(rng: np.random.Generator) -> dict:
    row = _base()
    row.update(service="ftp" if rng.random() < 0.7 else "ftp_data", flag="SF",
               logged_in=1, is_guest_login=1,
               duration=_i(rng, 1, 700), src_bytes=_i(rng, 400, 5000),
               dst_bytes=_i(rng, 0, 300), hot=_i(rng, 1, 30),
               count=_i(rng, 1, 6), srv_count=_i(rng, 1, 6),
               dst_host_count=_i(rng, 1, 255), dst_host_srv_count=_i(rng, 1, 255))
    return row


def _ftp_write(rng: np.random.Generator) -> dict:
    row = _base()
    row.update(service="ftp" if rng.random() < 0.6 else "ftp_data", flag="SF",
               logged_in=1, is_guest_login=1 if rng.random() < 0.5 else 0,
               duration=_i(rng, 2, 120), src_bytes=_i(rng, 100, 800),
               dst_bytes=_i(rng, 0, 400),
               num_file_creations=_i(rng, 1, 3), num_access_files=_i(rng, 1, 2),
               hot=_i(rng, 1, 6),
               dst_host_count=_i(rng, 1, 200), dst_host_srv_count=_i(rng, 1, 200))
    return row


def _imap(rng: np.random.Generator) -> dict:
    row = _base()
    row.update(service="imap4", flag="SF" if rng.random() < 0.6 else "RSTO",
               duration=_i(rng, 0, 10), src_bytes=_i(rng, 100, 1500),
               dst_bytes=_i(rng, 0, 400),
               dst_host_count=_i(rng, 1, 200), dst_host_srv_count=_i(rng, 1, 200))
    return row


def _buffer_overflow(rng: np.random.Generator) -> dict:
    row = _base()
    row.update(service="telnet", flag="SF", logged_in=1,
               duration=_i(rng, 2, 400), src_bytes=_i(rng, 1000, 6000),
               dst_bytes=_i(rng, 200, 2500),
               hot=_i(rng, 10, 30), root_shell=1, num_root=_i(rng, 1, 6),
               num_file_creations=_i(rng, 1, 4), num_shells=_i(rng, 0, 2),
               num_compromised=_i(rng, 0, 2),
               dst_host_count=_i(rng, 1, 120), dst_host_srv_count=_i(rng, 1, 120))
    return row


def _rootkit(rng: np.random.Generator) -> dict:
    row = _base()
    row.update(service="telnet" if rng.random() < 0.7 else "ftp", flag="SF",
               logged_in=1, duration=_i(rng, 10, 500),
               src_bytes=_i(rng, 300, 3000), dst_bytes=_i(rng, 100, 2000),
               num_root=_i(rng, 2, 10), num_file_creations=_i(rng, 1, 6),
               hot=_i(rng, 1, 5), root_shell=1 if rng.random() < 0.5 else 0,
               dst_host_count=_i(rng, 1, 120), dst_host_srv_count=_i(rng, 1, 120))
    return row


def _loadmodule(rng: np.random.Generator) -> dict:
    row = _base()
    row.update(service="telnet", flag="SF", logged_in=1,
               duration=_i(rng, 5, 300), src_bytes=_i(rng, 400, 3000),
               dst_bytes=_i(rng, 100, 1500),
               root_shell=1, num_file_creations=_i(rng, 1, 3),
               num_shells=_i(rng, 1, 2), hot=_i(rng, 1, 4),
               dst_host_count=_i(rng, 1, 120), dst_host_srv_count=_i(rng, 1, 120))
    return row


_PROFILES: Mapping[str, Callable[[np.random.Generator], dict]] = {
    "normal": _normal, "smurf": _smurf, "neptune": _neptune, "back": _back,
    "teardrop": _teardrop, "pod": _pod, "land": _land, "portsweep": _portsweep,
    "ipsweep": _ipsweep, "satan": _satan, "nmap": _nmap,
    "guess_passwd": _guess_passwd, "warezclient": _warezclient,
    "ftp_write": _ftp_write, "imap": _imap, "buffer_overflow": _buffer_overflow,
    "rootkit": _rootkit, "loadmodule": _loadmodule,
}


def sample_lines(
    seed: int = DEFAULT_SEED, mix: tuple[tuple[str, int], ...] = DEFAULT_MIX
) -> list[str]:
    """CSV lines (42 comma-separated fields each) for the sample, shuffled
    into a label-mixed order. Fully determined by seed and mix."""
    rng = np.random.default_rng(seed)
    rows: list[str] = []
    for label, n in mix:
        profile = _PROFILES[label]
        for _ in range(n):
            row = profile(rng)
            fields = []
            for name in _FEATURES:
                v = row[name]
                if isinstance(v, float):
                    fields.append(f"{v:.2f}" if v != int(v) else str(int(v)))
                else:
                    fields.append(str(v))
            fields.append(label + ".")
            rows.append(",".join(fields))
    order = rng.permutation(len(rows))
    return [rows[i] for i in order]


def make_sample(
    seed: int = DEFAULT_SEED, mix: tuple[tuple[str, int], ...] = DEFAULT_MIX
) -> Dataset:
    """The sample as a parsed Dataset (round-trips through the CSV format)."""
    return parse_kdd(sample_lines(seed, mix), kdd_schema())


def ensure_sample_file(path: str | Path, seed: int = DEFAULT_SEED) -> Path:
    """Materialize the sample CSV at `path` unless SIGMINE_KDD_PATH points
    at a real capture file, which then wins. Existing files are reused."""
    env = os.environ.get(KDD_PATH_ENV)
    if env:
        return Path(env)
    path = Path(path)
    if not path.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(sample_lines(seed)) + "\n", encoding="utf-8")
    return path

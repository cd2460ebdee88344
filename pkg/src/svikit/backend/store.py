"""Storage layer for the survey backend.

Two implementations of one small interface: an in-memory store used by
the tests and cheap deployments, and a SQLite store for anything that
must survive a restart. Invariant enforcement (caps, duplicates, undo
rules) lives in the service layer; stores are plain data access and are
always called under the service lock.
"""

from __future__ import annotations

import datetime as _dt
import os
import re
import sqlite3
import threading
from dataclasses import dataclass
from typing import Optional

from .. import SvikitError


class StoreError(SvikitError):
    pass


@dataclass
class Participant:
    participant_id: int
    age: int
    consent: bool
    gender: str | None = None
    education: str | None = None
    monthly_gross_income: float | None = None
    country: str | None = None
    postcode: str | None = None


@dataclass
class Session:
    session_id: int
    cookie_hash: str
    participant_id: int
    created_at: str


@dataclass
class SurveyImage:
    image_id: int
    url: str
    cityname: str
    lon: float
    lat: float
    enabled: bool = False


@dataclass
class RatingRecord:
    rating_id: int
    timestamp: _dt.datetime
    session_id: int
    image_id: int
    category_id: int
    score: int


_ENABLE_RE = re.compile(r"image_id\s*=\s*(\d+)", re.IGNORECASE)


def parse_enable_script(text: str) -> list[int]:
    """Image ids named by the enable statements emitted by the sampler."""
    return [int(m.group(1)) for m in _ENABLE_RE.finditer(text)]


class Store:
    """Interface; see MemoryStore for reference semantics."""

    def add_participant(self, p: Participant) -> int:
        raise NotImplementedError

    def add_session(self, participant_id: int, cookie_hash: str) -> Session:
        raise NotImplementedError

    def session_by_id(self, session_id: int) -> Optional[Session]:
        raise NotImplementedError

    def session_by_hash(self, cookie_hash: str) -> Optional[Session]:
        raise NotImplementedError

    def upsert_image(self, image: SurveyImage) -> None:
        raise NotImplementedError

    def get_image(self, image_id: int) -> Optional[SurveyImage]:
        raise NotImplementedError

    def enable_images(self, image_ids: list[int]) -> int:
        raise NotImplementedError

    def enabled_image_ids(self) -> list[int]:
        raise NotImplementedError

    def rated_image_ids(self, session_id: int) -> set[int]:
        raise NotImplementedError

    def category_counts(self, session_id: int) -> dict[int, int]:
        raise NotImplementedError

    def add_rating(self, session_id: int, image_id: int, category_id: int, score: int, timestamp: _dt.datetime) -> int:
        raise NotImplementedError

    def delete_rating(self, rating_id: int) -> None:
        raise NotImplementedError

    def undo_state(self, session_id: int) -> tuple[Optional[int], bool]:
        raise NotImplementedError

    def set_undo_state(self, session_id: int, rating_id: Optional[int], consumed: bool) -> None:
        raise NotImplementedError

    def all_participants(self) -> list[Participant]:
        raise NotImplementedError

    def all_ratings(self) -> list[RatingRecord]:
        raise NotImplementedError

    def export_rows(self) -> list[dict]:
        """Ratings joined with demographics, one dict per rating."""
        raise NotImplementedError

    def rating_points(self, category_id: int | None = None) -> list[tuple[float, float, int]]:
        """(lon, lat, score) per rating, optionally limited to one category."""
        raise NotImplementedError

    def close(self) -> None:
        pass


class MemoryStore(Store):
    def __init__(self) -> None:
        self.participants: dict[int, Participant] = {}
        self.sessions: dict[int, Session] = {}
        self.sessions_by_hash: dict[str, Session] = {}
        self.images: dict[int, SurveyImage] = {}
        self.ratings: dict[int, RatingRecord] = {}
        self.ratings_by_session: dict[int, dict[int, int]] = {}  # session -> image -> rating_id
        self.undo: dict[int, tuple[Optional[int], bool]] = {}
        self._next = {"participant": 1, "session": 1, "rating": 1}

    def _take(self, kind: str) -> int:
        value = self._next[kind]
        self._next[kind] = value + 1
        return value

    def add_participant(self, p: Participant) -> int:
        pid = self._take("participant")
        self.participants[pid] = Participant(**{**p.__dict__, "participant_id": pid})
        return pid

    def add_session(self, participant_id: int, cookie_hash: str) -> Session:
        if cookie_hash in self.sessions_by_hash:
            raise StoreError("cookie hash collision")
        sess = Session(
            session_id=self._take("session"),
            cookie_hash=cookie_hash,
            participant_id=participant_id,
            created_at=_dt.datetime.now(_dt.timezone.utc).isoformat(),
        )
        self.sessions[sess.session_id] = sess
        self.sessions_by_hash[cookie_hash] = sess
        return sess

    def session_by_id(self, session_id: int) -> Optional[Session]:
        return self.sessions.get(session_id)

    def session_by_hash(self, cookie_hash: str) -> Optional[Session]:
        return self.sessions_by_hash.get(cookie_hash)

    def upsert_image(self, image: SurveyImage) -> None:
        self.images[image.image_id] = image

    def get_image(self, image_id: int) -> Optional[SurveyImage]:
        return self.images.get(image_id)

    def enable_images(self, image_ids: list[int]) -> int:
        n = 0
        for image_id in image_ids:
            img = self.images.get(image_id)
            if img is not None and not img.enabled:
                img.enabled = True
                n += 1
        return n

    def enabled_image_ids(self) -> list[int]:
        return sorted(i for i, img in self.images.items() if img.enabled)

    def rated_image_ids(self, session_id: int) -> set[int]:
        return set(self.ratings_by_session.get(session_id, {}))

    def category_counts(self, session_id: int) -> dict[int, int]:
        counts = {c: 0 for c in range(1, 6)}
        for rating_id in self.ratings_by_session.get(session_id, {}).values():
            counts[self.ratings[rating_id].category_id] += 1
        return counts

    def add_rating(self, session_id: int, image_id: int, category_id: int, score: int, timestamp: _dt.datetime) -> int:
        rating_id = self._take("rating")
        self.ratings[rating_id] = RatingRecord(rating_id, timestamp, session_id, image_id, category_id, score)
        self.ratings_by_session.setdefault(session_id, {})[image_id] = rating_id
        return rating_id

    def delete_rating(self, rating_id: int) -> None:
        rec = self.ratings.pop(rating_id, None)
        if rec is not None:
            self.ratings_by_session.get(rec.session_id, {}).pop(rec.image_id, None)

    def undo_state(self, session_id: int) -> tuple[Optional[int], bool]:
        return self.undo.get(session_id, (None, True))

    def set_undo_state(self, session_id: int, rating_id: Optional[int], consumed: bool) -> None:
        self.undo[session_id] = (rating_id, consumed)

    def all_participants(self) -> list[Participant]:
        return list(self.participants.values())

    def all_ratings(self) -> list[RatingRecord]:
        return sorted(self.ratings.values(), key=lambda r: r.rating_id)

    def export_rows(self) -> list[dict]:
        rows = []
        for rec in self.all_ratings():
            sess = self.sessions[rec.session_id]
            part = self.participants[sess.participant_id]
            rows.append(_export_row(rec, part))
        return rows

    def rating_points(self, category_id: int | None = None) -> list[tuple[float, float, int]]:
        points = []
        for rec in self.all_ratings():
            if category_id is not None and rec.category_id != category_id:
                continue
            img = self.images.get(rec.image_id)
            if img is not None:
                points.append((img.lon, img.lat, rec.score))
        return points


def _export_row(rec: RatingRecord, part: Participant) -> dict:
    return {
        "id": rec.rating_id,
        "timestamp": rec.timestamp,
        "sess": rec.session_id,
        "image": rec.image_id,
        "cat": rec.category_id,
        "score": rec.score,
        "postcode": part.postcode,
        "country": part.country,
        "age": part.age,
        "mgi": part.monthly_gross_income,
        "education": part.education,
        "gender": part.gender,
    }


_SCHEMA = """
CREATE TABLE IF NOT EXISTS participants (
    participant_id INTEGER PRIMARY KEY AUTOINCREMENT,
    age INTEGER NOT NULL,
    consent INTEGER NOT NULL,
    gender TEXT, education TEXT, mgi REAL, country TEXT, postcode TEXT
);
CREATE TABLE IF NOT EXISTS sessions (
    session_id INTEGER PRIMARY KEY AUTOINCREMENT,
    cookie_hash TEXT UNIQUE NOT NULL,
    participant_id INTEGER NOT NULL REFERENCES participants(participant_id),
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS images (
    image_id INTEGER PRIMARY KEY,
    url TEXT NOT NULL,
    cityname TEXT NOT NULL,
    lon REAL NOT NULL,
    lat REAL NOT NULL,
    enabled INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS ratings (
    rating_id INTEGER PRIMARY KEY AUTOINCREMENT,
    timestamp TEXT NOT NULL,
    session_id INTEGER NOT NULL REFERENCES sessions(session_id),
    image_id INTEGER NOT NULL REFERENCES images(image_id),
    category_id INTEGER NOT NULL,
    score INTEGER NOT NULL,
    UNIQUE (session_id, image_id)
);
CREATE TABLE IF NOT EXISTS undo_state (
    session_id INTEGER PRIMARY KEY,
    rating_id INTEGER,
    consumed INTEGER NOT NULL
);
"""


class SqliteStore(Store):
    """SQLite-backed store; one connection guarded by a lock."""

    def __init__(self, path: str | os.PathLike):
        self._conn = sqlite3.connect(os.fspath(path), check_same_thread=False)
        self._conn.execute("PRAGMA journal_mode=WAL")
        self._conn.execute("PRAGMA foreign_keys=ON")
        self._lock = threading.Lock()
        with self._lock, self._conn:
            self._conn.executescript(_SCHEMA)

    def add_participant(self, p: Participant) -> int:
        with self._lock, self._conn:
            cur = self._conn.execute(
                "INSERT INTO participants (age, consent, gender, education, mgi, country, postcode)"
                " VALUES (?, ?, ?, ?, ?, ?, ?)",
                (p.age, int(p.consent), p.gender, p.education, p.monthly_gross_income, p.country, p.postcode),
            )
            return cur.lastrowid

    def add_session(self, participant_id: int, cookie_hash: str) -> Session:
        created = _dt.datetime.now(_dt.timezone.utc).isoformat()
        with self._lock, self._conn:
            cur = self._conn.execute(
                "INSERT INTO sessions (cookie_hash, participant_id, created_at) VALUES (?, ?, ?)",
                (cookie_hash, participant_id, created),
            )
            return Session(cur.lastrowid, cookie_hash, participant_id, created)

    def _session_from_row(self, row) -> Optional[Session]:
        return Session(*row) if row else None

    def session_by_id(self, session_id: int) -> Optional[Session]:
        with self._lock:
            row = self._conn.execute(
                "SELECT session_id, cookie_hash, participant_id, created_at FROM sessions WHERE session_id=?",
                (session_id,),
            ).fetchone()
        return self._session_from_row(row)

    def session_by_hash(self, cookie_hash: str) -> Optional[Session]:
        with self._lock:
            row = self._conn.execute(
                "SELECT session_id, cookie_hash, participant_id, created_at FROM sessions WHERE cookie_hash=?",
                (cookie_hash,),
            ).fetchone()
        return self._session_from_row(row)

    def upsert_image(self, image: SurveyImage) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO images (image_id, url, cityname, lon, lat, enabled) VALUES (?, ?, ?, ?, ?, ?)"
                " ON CONFLICT(image_id) DO UPDATE SET url=excluded.url, cityname=excluded.cityname,"
                " lon=excluded.lon, lat=excluded.lat, enabled=excluded.enabled",
                (image.image_id, image.url, image.cityname, image.lon, image.lat, int(image.enabled)),
            )

    def get_image(self, image_id: int) -> Optional[SurveyImage]:
        with self._lock:
            row = self._conn.execute(
                "SELECT image_id, url, cityname, lon, lat, enabled FROM images WHERE image_id=?", (image_id,)
            ).fetchone()
        if not row:
            return None
        return SurveyImage(row[0], row[1], row[2], row[3], row[4], bool(row[5]))

    def enable_images(self, image_ids: list[int]) -> int:
        with self._lock, self._conn:
            n = 0
            for image_id in image_ids:
                cur = self._conn.execute(
                    "UPDATE images SET enabled=1 WHERE image_id=? AND enabled=0", (image_id,)
                )
                n += cur.rowcount
            return n

    def enabled_image_ids(self) -> list[int]:
        with self._lock:
            rows = self._conn.execute("SELECT image_id FROM images WHERE enabled=1 ORDER BY image_id").fetchall()
        return [r[0] for r in rows]

    def rated_image_ids(self, session_id: int) -> set[int]:
        with self._lock:
            rows = self._conn.execute("SELECT image_id FROM ratings WHERE session_id=?", (session_id,)).fetchall()
        return {r[0] for r in rows}

    def category_counts(self, session_id: int) -> dict[int, int]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT category_id, COUNT(*) FROM ratings WHERE session_id=? GROUP BY category_id", (session_id,)
            ).fetchall()
        counts = {c: 0 for c in range(1, 6)}
        counts.update({r[0]: r[1] for r in rows})
        return counts

    def add_rating(self, session_id: int, image_id: int, category_id: int, score: int, timestamp: _dt.datetime) -> int:
        with self._lock, self._conn:
            cur = self._conn.execute(
                "INSERT INTO ratings (timestamp, session_id, image_id, category_id, score) VALUES (?, ?, ?, ?, ?)",
                (timestamp.isoformat(), session_id, image_id, category_id, score),
            )
            return cur.lastrowid

    def delete_rating(self, rating_id: int) -> None:
        with self._lock, self._conn:
            self._conn.execute("DELETE FROM ratings WHERE rating_id=?", (rating_id,))

    def undo_state(self, session_id: int) -> tuple[Optional[int], bool]:
        with self._lock:
            row = self._conn.execute(
                "SELECT rating_id, consumed FROM undo_state WHERE session_id=?", (session_id,)
            ).fetchone()
        if not row:
            return None, True
        return row[0], bool(row[1])

    def set_undo_state(self, session_id: int, rating_id: Optional[int], consumed: bool) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO undo_state (session_id, rating_id, consumed) VALUES (?, ?, ?)"
                " ON CONFLICT(session_id) DO UPDATE SET rating_id=excluded.rating_id, consumed=excluded.consumed",
                (session_id, rating_id, int(consumed)),
            )

    def all_participants(self) -> list[Participant]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT participant_id, age, consent, gender, education, mgi, country, postcode FROM participants"
            ).fetchall()
        return [
            Participant(r[0], r[1], bool(r[2]), r[3], r[4], r[5], r[6], r[7])
            for r in rows
        ]

    def all_ratings(self) -> list[RatingRecord]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT rating_id, timestamp, session_id, image_id, category_id, score FROM ratings ORDER BY rating_id"
            ).fetchall()
        return [
            RatingRecord(r[0], _dt.datetime.fromisoformat(r[1]), r[2], r[3], r[4], r[5])
            for r in rows
        ]

    def export_rows(self) -> list[dict]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT r.rating_id, r.timestamp, r.session_id, r.image_id, r.category_id, r.score,"
                " p.postcode, p.country, p.age, p.mgi, p.education, p.gender"
                " FROM ratings r JOIN sessions s ON r.session_id = s.session_id"
                " JOIN participants p ON s.participant_id = p.participant_id ORDER BY r.rating_id"
            ).fetchall()
        return [
            {
                "id": r[0],
                "timestamp": _dt.datetime.fromisoformat(r[1]),
                "sess": r[2],
                "image": r[3],
                "cat": r[4],
                "score": r[5],
                "postcode": r[6],
                "country": r[7],
                "age": r[8],
                "mgi": r[9],
                "education": r[10],
                "gender": r[11],
            }
            for r in rows
        ]

    def rating_points(self, category_id: int | None = None) -> list[tuple[float, float, int]]:
        query = (
            "SELECT i.lon, i.lat, r.score FROM ratings r JOIN images i ON r.image_id = i.image_id"
        )
        args: tuple = ()
        if category_id is not None:
            query += " WHERE r.category_id=?"
            args = (category_id,)
        with self._lock:
            rows = self._conn.execute(query + " ORDER BY r.rating_id", args).fetchall()
        return [(r[0], r[1], r[2]) for r in rows]

    def close(self) -> None:
        self._conn.close()


def open_store(uri: str) -> Store:
    """":memory:" gives a fresh MemoryStore; anything else is a SQLite path."""
    if uri == ":memory:":
        return MemoryStore()
    return SqliteStore(uri)

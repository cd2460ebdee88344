"""Domain logic of the survey API: sessions, ratings, caps, and undo.

All invariants are enforced here, under one lock, regardless of which
store backs the data: consent and 18+ are required before anything is
stored, a session rates an image at most once, each of the five
categories caps at 20 ratings, and only the single most recent rating
can be undone (once). The API surface treats every caller as untrusted.
"""

from __future__ import annotations

import datetime as _dt
import json
import random
import secrets
import threading
from pathlib import Path

from .. import SvikitError
from .store import Participant, Store, SurveyImage, parse_enable_script

CATEGORY_NAMES = {1: "Walkability", 2: "Bikeability", 3: "Pleasantness", 4: "Greenness", 5: "Safety"}
SCORE_NAMES = {1: "awful", 2: "bad", 3: "neutral", 4: "good", 5: "great"}
EDUCATION_LEVELS = ("Primary", "Secondary", "Tertiary", "Postgraduate")

RATINGS_PER_CATEGORY = 20
MIN_AGE = 18
COOKIE_HASH_BYTES = 16  # 128 random bits, hex encoded


class ApiError(SvikitError):
    """An error with a wire-format code and HTTP status."""

    def __init__(self, code: str, http_status: int, detail: str | None = None):
        super().__init__(detail or code)
        self.code = code
        self.http_status = http_status


def _validation(detail: str) -> ApiError:
    return ApiError("ValidationError", 400, detail)


def _parse_int(value, name: str) -> int:
    if isinstance(value, bool):
        raise _validation(f"{name} must be an integer")
    try:
        return int(str(value).strip())
    except (ValueError, TypeError):
        raise _validation(f"{name} must be an integer") from None


def _parse_consent(value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        return value.strip().lower() in ("true", "1", "yes", "on")
    if isinstance(value, (int, float)):
        return value == 1
    return False


class SurveyService:
    """The six public API operations over a :class:`Store`."""

    def __init__(self, store: Store, rng: random.Random | None = None):
        self.store = store
        self.rng = rng or random.Random()
        self._lock = threading.RLock()

    # -- participants and sessions ------------------------------------

    def newperson(
        self,
        age,
        consent,
        monthly_gross_income=None,
        education=None,
        gender=None,
        country=None,
        postcode=None,
    ) -> dict:
        """Store a participant plus a fresh session; only age and consent required."""
        if age is None:
            raise _validation("age is required")
        age_val = _parse_int(age, "age")
        if age_val <= 0:
            raise _validation("age must be a positive integer")
        if not _parse_consent(consent):
            raise ApiError("NoConsent", 400, "explicit consent is required")
        if age_val < MIN_AGE:
            raise ApiError("Underage", 400, "participants must be 18 or older")
        if education is not None and str(education) != "" and str(education) not in EDUCATION_LEVELS:
            raise _validation(f"education must be one of {EDUCATION_LEVELS}")
        mgi = None
        if monthly_gross_income is not None and str(monthly_gross_income) != "":
            try:
                mgi = float(monthly_gross_income)
            except (TypeError, ValueError):
                raise _validation("monthly_gross_income must be numeric") from None
        participant = Participant(
            participant_id=0,
            age=age_val,
            consent=True,
            gender=str(gender) if gender not in (None, "") else None,
            education=str(education) if education not in (None, "") else None,
            monthly_gross_income=mgi,
            country=str(country) if country not in (None, "") else None,
            postcode=str(postcode) if postcode not in (None, "") else None,
        )
        with self._lock:
            pid = self.store.add_participant(participant)
            session = self.store.add_session(pid, secrets.token_hex(COOKIE_HASH_BYTES))
        return {"session_id": session.session_id, "cookie_hash": session.cookie_hash}

    def getsession(self, session_id=None, cookie_hash=None) -> dict:
        """Complete the (session_id, cookie_hash) pair from either half."""
        if (session_id is None) == (cookie_hash is None):
            raise _validation("supply exactly one of session_id or cookie_hash")
        with self._lock:
            if session_id is not None:
                session = self.store.session_by_id(_parse_int(session_id, "session_id"))
            else:
                session = self.store.session_by_hash(str(cookie_hash))
        if session is None:
            raise ApiError("NotFound", 404, "unknown session")
        return {"session_id": session.session_id, "cookie_hash": session.cookie_hash}

    def _auth(self, session_id, cookie_hash):
        sid = _parse_int(session_id, "session_id")
        session = self.store.session_by_id(sid)
        if session is None or session.cookie_hash != str(cookie_hash):
            raise ApiError("AuthError", 401, "session_id/cookie_hash mismatch")
        return session

    def _require_session(self, session_id):
        sid = _parse_int(session_id, "session_id")
        session = self.store.session_by_id(sid)
        if session is None:
            raise ApiError("NotFound", 404, "unknown session")
        return session

    # -- images ---------------------------------------------------------

    def fetch(self, session_id) -> dict:
        """A uniformly random enabled image this session has not rated yet.

        Skips happen purely in the frontend, so a skipped image stays
        eligible and may be served again.
        """
        with self._lock:
            session = self._require_session(session_id)
            rated = self.store.rated_image_ids(session.session_id)
            eligible = [i for i in self.store.enabled_image_ids() if i not in rated]
            if not eligible:
                raise ApiError("Exhausted", 404, "no unrated images remain")
            image = self.store.get_image(self.rng.choice(eligible))
        return {"cityname": image.cityname, "url": image.url, "image_id": image.image_id}

    # -- ratings ----------------------------------------------------------

    def new_rating(self, session_id, cookie_hash, image_id, category_id, rating) -> dict:
        """Record one rating; returns the per-category counts payload."""
        category = _parse_int(category_id, "category_id")
        score = _parse_int(rating, "rating")
        if category not in CATEGORY_NAMES:
            raise _validation("category_id must be in 1..5")
        if score not in SCORE_NAMES:
            raise _validation("rating must be in 1..5")
        img_id = _parse_int(image_id, "image_id")
        with self._lock:
            session = self._auth(session_id, cookie_hash)
            image = self.store.get_image(img_id)
            if image is None or not image.enabled:
                raise ApiError("NotFound", 404, "image not available for rating")
            if img_id in self.store.rated_image_ids(session.session_id):
                raise ApiError("Duplicate", 409, "image already rated in this session")
            counts = self.store.category_counts(session.session_id)
            if counts[category] >= RATINGS_PER_CATEGORY:
                raise ApiError("CategoryFull", 409, f"category {category} already has {RATINGS_PER_CATEGORY} ratings")
            rating_id = self.store.add_rating(
                session.session_id, img_id, category, score, _dt.datetime.now(_dt.timezone.utc)
            )
            self.store.set_undo_state(session.session_id, rating_id, consumed=False)
            return self._counts_payload(session.session_id)

    def undo(self, session_id, cookie_hash) -> dict:
        """Delete the most recent rating, at most once per new rating."""
        with self._lock:
            session = self._auth(session_id, cookie_hash)
            rating_id, consumed = self.store.undo_state(session.session_id)
            if rating_id is None or consumed:
                raise ApiError("UndoUnavailable", 409, "nothing eligible for undo")
            self.store.delete_rating(rating_id)
            self.store.set_undo_state(session.session_id, rating_id, consumed=True)
            return self._counts_payload(session.session_id)

    def count_ratings_by_category(self, session_id) -> dict:
        with self._lock:
            session = self._require_session(session_id)
            return self._counts_payload(session.session_id)

    def _counts_payload(self, session_id: int) -> dict:
        counts = self.store.category_counts(session_id)
        return {"category_counts": {str(c): counts[c] for c in range(1, 6)}}

    # -- manifest ingestion ------------------------------------------------

    def ingest_manifest(self, path: str | Path) -> int:
        """Load survey images from a sampler manifest (JSONL, header first)."""
        n = 0
        with self._lock:
            for line in Path(path).read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                doc = json.loads(line)
                if doc.get("kind") == "svikit-manifest":
                    continue
                self.store.upsert_image(
                    SurveyImage(
                        image_id=int(doc["image_id"]),
                        url=str(doc["url"]),
                        cityname=str(doc.get("cityname", "")),
                        lon=float(doc["lon"]),
                        lat=float(doc["lat"]),
                        enabled=bool(doc.get("enabled", False)),
                    )
                )
                n += 1
        return n

    def apply_enable_script(self, path: str | Path) -> int:
        """Run the sampler's enable statements; returns how many flipped."""
        ids = parse_enable_script(Path(path).read_text(encoding="utf-8"))
        with self._lock:
            return self.store.enable_images(ids)

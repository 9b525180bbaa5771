"""Event and POI CSV ingestion."""
import io
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from config.run_config import EventSchema
from errors import EventParseError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Event:
    id: int
    timestamp: int
    lon: float
    lat: float
    category: Optional[str] = None


@dataclass
class ParsedEvents:
    events: List[Event]
    dropped: int

    def coordinates(self):
        lons = np.fromiter((e.lon for e in self.events), dtype=float, count=len(self.events))
        lats = np.fromiter((e.lat for e in self.events), dtype=float, count=len(self.events))
        return lons, lats

    def timestamps(self) -> np.ndarray:
        return np.fromiter((e.timestamp for e in self.events), dtype=np.int64, count=len(self.events))


def parse_events_csv(data: bytes, schema: EventSchema = EventSchema(),
                     require_category: bool = False, require_timestamp: bool = True) -> ParsedEvents:
    """
    Parse a headered CSV into events.

    Timestamps are ISO-8601 (read as UTC) or numeric epoch seconds. Rows
    whose timestamp does not parse or whose coordinates fall outside WGS84
    range are dropped and counted; surviving rows get ids 0..n-1 in input order.
    """
    if not data or not data.strip():
        raise EventParseError("Event file is empty")
    try:
        frame = pd.read_csv(io.BytesIO(data), dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise EventParseError("Event file is empty")
    except pd.errors.ParserError as e:
        raise EventParseError(f"Malformed CSV: {e}")

    required = [schema.latitude, schema.longitude]
    if require_timestamp:
        required.append(schema.timestamp)
    if require_category:
        required.append(schema.category)
    for column in required:
        if column not in frame.columns:
            raise EventParseError(f"Missing configured column '{column}'")

    n_rows = len(frame)
    lat = pd.to_numeric(frame[schema.latitude], errors='coerce')
    lon = pd.to_numeric(frame[schema.longitude], errors='coerce')
    valid = lat.between(-90.0, 90.0) & lon.between(-180.0, 180.0)

    seconds = np.zeros(n_rows, dtype=np.int64)
    if schema.timestamp in frame.columns:
        raw = frame[schema.timestamp].str.strip()
        numeric = pd.to_numeric(raw, errors='coerce')
        iso = pd.to_datetime(raw.where(numeric.isna()), utc=True, errors='coerce', format='ISO8601')
        ts = iso.where(numeric.isna(), pd.to_datetime(numeric, unit='s', utc=True, errors='coerce'))
        if require_timestamp:
            valid &= ts.notna()
        ok = ts.notna().to_numpy()
        if ok.any():
            epoch = pd.Timestamp(0, tz='UTC')
            seconds[ok] = ((ts[ok] - epoch) // pd.Timedelta(seconds=1)).to_numpy(dtype=np.int64)

    has_category = schema.category in frame.columns
    if require_category:
        valid &= frame[schema.category].str.strip() != ''

    keep = valid.to_numpy()
    lat_v = lat.to_numpy()[keep]
    lon_v = lon.to_numpy()[keep]
    sec_v = seconds[keep]
    cat_v = frame[schema.category].to_numpy()[keep] if has_category else [None] * int(keep.sum())

    events = [
        Event(id=i, timestamp=int(sec_v[i]), lon=float(lon_v[i]), lat=float(lat_v[i]),
              category=(cat_v[i] if cat_v[i] not in (None, '') else None))
        for i in range(len(sec_v))
    ]
    dropped = n_rows - len(events)
    if dropped:
        logger.warning(f"⚠️ Dropped {dropped}/{n_rows} rows with unparseable timestamps or coordinates")
    logger.info(f"✅ Parsed {len(events)} events")
    return ParsedEvents(events=events, dropped=dropped)


def parse_poi_csv(data: bytes, schema: EventSchema = EventSchema()) -> ParsedEvents:
    """POIs share the event schema; category is mandatory, timestamp optional (0)."""
    parsed = parse_events_csv(data, schema, require_category=True, require_timestamp=False)
    if not any(e.category for e in parsed.events):
        raise EventParseError("No POI has a category")
    return parsed

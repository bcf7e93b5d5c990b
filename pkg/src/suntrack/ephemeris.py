"""Solar position: azimuth/elevation for any UTC time and location on Earth.

Implements the approximate almanac algorithm of Michalsky (1988), which keeps
the sun within about 0.02 degrees of a high-accuracy ephemeris between 1950
and 2100. That is comfortably inside the 0.5 degree budget the tracking and
energy modules rely on, and needs nothing beyond the standard library and
numpy. Refraction is ignored.

Directions use the local East-North-Up tangent frame throughout: azimuth is
measured clockwise from true north, elevation up from the horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone

import numpy as np

DEG = math.pi / 180.0

YEAR_MIN = 1950
YEAR_MAX = 2100


class NoDaylight(ValueError):
    """The sun stays below the horizon for the whole day (polar night)."""


class NoNight(ValueError):
    """The sun stays at or above the horizon for the whole day (midnight sun)."""


@dataclass(frozen=True)
class GeoLocation:
    """A point on Earth's surface.

    latitude_deg: geographic latitude, positive north, in [-90, 90].
    longitude_deg: geographic longitude, positive east, in [-180, 180].
    """

    latitude_deg: float
    longitude_deg: float

    def __post_init__(self):
        if not -90.0 <= self.latitude_deg <= 90.0:
            raise ValueError(f"latitude_deg out of range: {self.latitude_deg}")
        if not -180.0 <= self.longitude_deg <= 180.0:
            raise ValueError(f"longitude_deg out of range: {self.longitude_deg}")


@dataclass(frozen=True)
class SolarAngles:
    """Sun direction: azimuth clockwise from north [0, 360), elevation [-90, 90]."""

    azimuth_deg: float
    elevation_deg: float

    def __post_init__(self):
        if not 0.0 <= self.azimuth_deg < 360.0:
            raise ValueError(f"azimuth_deg out of range: {self.azimuth_deg}")
        if not -90.0 <= self.elevation_deg <= 90.0:
            raise ValueError(f"elevation_deg out of range: {self.elevation_deg}")


def _as_utc(t: datetime) -> datetime:
    """Normalize to UTC; naive datetimes are taken to already be UTC."""
    if t.tzinfo is None:
        return t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


def julian_day(t: datetime) -> float:
    """Julian day number for a UTC instant (Gregorian calendar)."""
    t = _as_utc(t)
    y, m = t.year, t.month
    d = t.day + (t.hour + t.minute / 60.0 + t.second / 3600.0
                 + t.microsecond / 3.6e9) / 24.0
    if m <= 2:
        y -= 1
        m += 12
    a = y // 100
    b = 2 - a + a // 4
    return math.floor(365.25 * (y + 4716)) + math.floor(30.6001 * (m + 1)) + d + b - 1524.5


def solar_direction(t: datetime, loc: GeoLocation) -> SolarAngles:
    """Sun azimuth/elevation at UTC time ``t`` as seen from ``loc``.

    Pure function; accurate to well under 0.5 degrees inside the 1950-2100
    validity window of the almanac approximation.

    Raises:
        ValueError: ``t`` outside the validity window.
    """
    t = _as_utc(t)
    if not YEAR_MIN <= t.year <= YEAR_MAX:
        raise ValueError(f"timestamp year {t.year} outside validity window "
                         f"[{YEAR_MIN}, {YEAR_MAX}]")
    n = julian_day(t) - 2451545.0

    # ecliptic position of the sun
    mean_lon = (280.460 + 0.9856474 * n) % 360.0
    mean_anom = ((357.528 + 0.9856003 * n) % 360.0) * DEG
    ecl_lon = ((mean_lon + 1.915 * math.sin(mean_anom)
                + 0.020 * math.sin(2.0 * mean_anom)) % 360.0) * DEG
    obliquity = (23.439 - 0.0000004 * n) * DEG

    ra = math.atan2(math.cos(obliquity) * math.sin(ecl_lon), math.cos(ecl_lon))
    dec = math.asin(math.sin(obliquity) * math.sin(ecl_lon))

    hours = t.hour + t.minute / 60.0 + t.second / 3600.0 + t.microsecond / 3.6e9
    gmst_hours = (6.697375 + 0.0657098242 * n + hours) % 24.0
    hour_angle = (gmst_hours * 15.0 + loc.longitude_deg) * DEG - ra

    lat = loc.latitude_deg * DEG
    sd, cd = math.sin(dec), math.cos(dec)
    sl, cl = math.sin(lat), math.cos(lat)
    east = -cd * math.sin(hour_angle)
    north = sd * cl - cd * math.cos(hour_angle) * sl
    up = sd * sl + cd * math.cos(hour_angle) * cl

    azimuth = math.atan2(east, north) % (2.0 * math.pi)
    elevation = math.asin(max(-1.0, min(1.0, up)))
    az_deg = (azimuth / DEG) % 360.0
    if az_deg >= 360.0:  # guard the half-open range against rounding
        az_deg = 0.0
    return SolarAngles(azimuth_deg=az_deg, elevation_deg=elevation / DEG)


def sun_unit_vector(a: SolarAngles) -> np.ndarray:
    """Unit direction toward the sun in the East-North-Up frame."""
    az = a.azimuth_deg * DEG
    el = a.elevation_deg * DEG
    return np.array([
        math.cos(el) * math.sin(az),
        math.cos(el) * math.cos(az),
        math.sin(el),
    ])


def angles_from_vector(v) -> SolarAngles:
    """Inverse of sun_unit_vector for any nonzero East-North-Up vector."""
    east, north, up = (float(c) for c in v)
    norm = math.sqrt(east * east + north * north + up * up)
    if norm == 0.0:
        raise ValueError("zero vector has no direction")
    az = math.atan2(east, north) % (2.0 * math.pi)
    el = math.asin(max(-1.0, min(1.0, up / norm)))
    az_deg = (az / DEG) % 360.0
    if az_deg >= 360.0:
        az_deg = 0.0
    return SolarAngles(azimuth_deg=az_deg, elevation_deg=el / DEG)


def daylight_window(day: date, loc: GeoLocation) -> tuple[datetime, datetime]:
    """Sunrise and sunset (UTC) for the local solar day containing ``day``.

    The day is anchored at mean local noon, 12:00 UTC minus longitude/15
    hours, and searched 12 hours to either side; crossings are refined by
    bisection to one second. Elevation >= 0 counts as daylight.

    Raises:
        NoDaylight: the sun never reaches the horizon (polar night).
        NoNight: the sun never drops below it (midnight sun).
    """
    noon = (datetime.combine(day, time(12, 0), tzinfo=timezone.utc)
            - timedelta(hours=loc.longitude_deg / 15.0))

    def elevation(t: datetime) -> float:
        return solar_direction(t, loc).elevation_deg

    step = timedelta(minutes=5)
    times = [noon + (i - 144) * step for i in range(289)]
    els = [elevation(t) for t in times]

    peak = int(np.argmax(els))
    if els[peak] < 0.0:
        raise NoDaylight(f"sun stays below the horizon on {day} at {loc}")

    rise_bracket = None
    for i in range(peak, 0, -1):
        if els[i - 1] < 0.0 <= els[i]:
            rise_bracket = (times[i - 1], times[i])
            break
    set_bracket = None
    for i in range(peak, len(els) - 1):
        if els[i] >= 0.0 > els[i + 1]:
            set_bracket = (times[i], times[i + 1])
            break
    if rise_bracket is None or set_bracket is None:
        raise NoNight(f"sun never sets on {day} at {loc}")

    def bisect(lo: datetime, hi: datetime, rising: bool) -> datetime:
        while (hi - lo).total_seconds() > 1.0:
            mid = lo + (hi - lo) / 2
            above = elevation(mid) >= 0.0
            if above == rising:
                hi = mid
            else:
                lo = mid
        return lo + (hi - lo) / 2

    sunrise = bisect(*rise_bracket, rising=True)
    sunset = bisect(*set_bracket, rising=False)
    return sunrise, sunset

"""
Profile module for PVBat-Sizer.

This module provides the time series the optimization runs on:
- Load and PV profile parsing and validation
- Profile averaging to coarser resolutions
- Energy totals
- A synthetic household year for runs without measured data
"""

import math
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

HOURS_PER_YEAR = 8760.0
PV_WARN_LIMIT = 1.0
PV_HARD_LIMIT = 1.5
SYNTHETIC_PV_PEAK = 1.0


class ProfileError(ValueError):
    """Raised for malformed or inconsistent profiles."""


class ProfileKind(str, Enum):
    LOAD = "load"
    PV_NORMALIZED = "pv_normalized"


CSV_HEADERS = {
    ProfileKind.LOAD: "load_w",
    ProfileKind.PV_NORMALIZED: "pv_w_per_wp",
}


@dataclass(frozen=True)
class Profile:
    """
    Fixed-resolution time series.

    ``values`` are W for load profiles and W/Wp for normalized PV profiles. The array is
    made read-only on construction.
    """
    kind: ProfileKind
    values: np.ndarray
    dt_hours: float
    start_label: Optional[str] = None

    def __post_init__(self) -> None:
        kind = ProfileKind(self.kind)
        values = np.array(self.values, dtype=float).ravel()
        if values.size == 0:
            raise ProfileError("profile has no samples")
        if not (math.isfinite(self.dt_hours) and self.dt_hours > 0):
            raise ProfileError(f"dt_hours must be positive, got {self.dt_hours}")

        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise ProfileError(f"non-finite sample at row {bad[0] + 1}")
        negative = np.flatnonzero(values < 0)
        if negative.size:
            raise ProfileError(f"negative sample at row {negative[0] + 1}")

        if kind is ProfileKind.PV_NORMALIZED:
            too_high = np.flatnonzero(values > PV_HARD_LIMIT)
            if too_high.size:
                raise ProfileError(
                    f"normalized PV sample {values[too_high[0]]} W/Wp at row {too_high[0] + 1} "
                    f"exceeds {PV_HARD_LIMIT}"
                )
            above_stc = int(np.count_nonzero(values > PV_WARN_LIMIT))
            if above_stc:
                logger.warning(f"{above_stc} PV samples exceed {PV_WARN_LIMIT} W/Wp")

        values.setflags(write=False)
        object.__setattr__(self, 'kind', kind)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'dt_hours', float(self.dt_hours))

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def span_hours(self) -> float:
        return len(self) * self.dt_hours

    def scaled(self, factor: float) -> "Profile":
        """Return a copy with every sample multiplied by ``factor``."""
        return Profile(self.kind, self.values * factor, self.dt_hours, self.start_label)


def load_profile_csv(path: str, kind: ProfileKind, dt_hours: float) -> Profile:
    """
    Load a single-column profile CSV.

    One numeric sample per row; a single non-numeric first line is treated as a header.

    Args:
        path (str): Path to the CSV file.
        kind (ProfileKind): Profile kind.
        dt_hours (float): Sample interval in hours.

    Returns:
        Profile: The validated profile, one sample per data row.

    Raises:
        ProfileError: On empty files, unparseable rows and invalid samples. Row numbers
            count data rows from 1.
    """
    try:
        frame = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=True,
                            skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise ProfileError(f"empty profile file: {path}")
    except pd.errors.ParserError as e:
        raise ProfileError(f"could not parse {path}: {e}")

    if frame.shape[1] != 1:
        raise ProfileError(f"expected one column in {path}, found {frame.shape[1]}")

    raw = frame.iloc[:, 0].str.strip()
    numeric = pd.to_numeric(raw, errors='coerce')
    if pd.isna(numeric.iloc[0]) and raw.iloc[0] not in ('nan', 'NaN'):
        # header line
        raw = raw.iloc[1:]
        numeric = numeric.iloc[1:]
    if numeric.empty:
        raise ProfileError(f"empty profile file: {path}")

    unparsed = np.flatnonzero(numeric.isna().to_numpy() & ~raw.str.lower().isin(['nan']).to_numpy())
    if unparsed.size:
        row = int(unparsed[0])
        raise ProfileError(f"could not parse sample {raw.iloc[row]!r} at row {row + 1}")

    return Profile(ProfileKind(kind), raw.astype(float).to_numpy(), dt_hours)


def write_profile_csv(profile: Profile, path: str) -> None:
    """
    Write a profile as a single-column CSV with a header line.

    Args:
        profile (Profile): The profile to write.
        path (str): Destination path.
    """
    frame = pd.DataFrame({CSV_HEADERS[profile.kind]: profile.values})
    frame.to_csv(path, index=False, float_format=None, lineterminator='\n')


def resample_average(profile: Profile, factor: int) -> Profile:
    """
    Average consecutive blocks of ``factor`` samples.

    Args:
        profile (Profile): Input profile.
        factor (int): Block length, a positive integer dividing the profile length.

    Returns:
        Profile: Profile of length ``len(profile) / factor`` at ``dt_hours * factor``.

    Raises:
        ProfileError: If ``factor`` is not positive or does not divide the length.
    """
    if int(factor) != factor or factor < 1:
        raise ProfileError(f"resample factor must be a positive integer, got {factor}")
    factor = int(factor)
    if factor == 1:
        return profile
    if len(profile) % factor:
        raise ProfileError(
            f"profile length {len(profile)} is not divisible by resample factor {factor}"
        )
    averaged = profile.values.reshape(-1, factor).mean(axis=1)
    return Profile(profile.kind, averaged, profile.dt_hours * factor, profile.start_label)


def annual_energy(profile: Profile) -> float:
    """
    Total energy of a profile, Σ value·dt.

    Returns Wh for load profiles and Wh/Wp for normalized PV profiles.
    """
    return float(np.sum(profile.values) * profile.dt_hours)


def align_profiles(load: Profile, pv: Profile) -> None:
    """
    Check that a load and a PV profile can be used together.

    Raises:
        ProfileError: On kind mismatch, unequal length or unequal resolution.
    """
    if load.kind is not ProfileKind.LOAD or pv.kind is not ProfileKind.PV_NORMALIZED:
        raise ProfileError("expected a load profile and a normalized PV profile")
    if len(load) != len(pv):
        raise ProfileError(f"profile lengths differ: load {len(load)}, pv {len(pv)}")
    if not math.isclose(load.dt_hours, pv.dt_hours, rel_tol=1e-12):
        raise ProfileError(
            f"profile resolutions differ: load {load.dt_hours} h, pv {pv.dt_hours} h"
        )


def _load_shape(hours: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    hod = np.mod(hours, 24.0)
    day = np.floor(hours / 24.0)
    morning = 0.55 * np.exp(-((hod - 7.5) ** 2) / 2.0)
    evening = 1.0 * np.exp(-((hod - 19.5) ** 2) / 4.5)
    winter = 1.0 + 0.25 * np.cos(2.0 * np.pi * day / 365.0)
    noise = rng.lognormal(mean=0.0, sigma=0.35, size=hours.size)
    return (0.18 + morning + evening) * winter * noise


def _pv_clear_sky(hours: np.ndarray) -> np.ndarray:
    hod = np.mod(hours, 24.0)
    day = np.floor(hours / 24.0)
    season = np.sin(2.0 * np.pi * (day - 80) / 365.0)
    day_length = 12.0 + 4.0 * season
    sunrise = 12.0 - day_length / 2.0
    elevation = np.clip(np.sin(np.pi * (hod - sunrise) / day_length), 0.0, None)
    amplitude = SYNTHETIC_PV_PEAK * (0.94 + 0.05 * season)
    return amplitude * elevation ** 1.2


def _clearness(hours: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    day = np.floor(hours / 24.0).astype(int)
    days = np.unique(day)
    cloud = rng.beta(0.4, 0.8, size=days.size)
    # at least one clear day in every full week
    for block in range(0, days.size - 6, 7):
        cloud[block + int(np.argmin(cloud[block:block + 7]))] = 0.0
    cloud_of = dict(zip(days, cloud))
    daily = np.array([cloud_of[d] for d in day])
    flicker = np.clip(1.0 + 0.2 * daily * rng.standard_normal(hours.size), 0.3, 1.0)
    return (1.0 - 0.9 * daily) * flicker


def _calibrate_clearness(clear: np.ndarray, clearness: np.ndarray, target: float,
                         dt_hours: float) -> np.ndarray:
    """Raise the clearness to the power that meets ``target``; clear samples keep their peak."""
    def energy(power: float) -> float:
        return float(np.sum(clear * clearness ** power) * dt_hours)

    if energy(0.0) < target:
        scale = target / energy(0.0)
        logger.warning(f"PV target exceeds the clear-sky energy of the span, "
                       f"scaling the clear-sky profile by {scale:.3f}")
        return clear * scale
    low, high = 0.0, 64.0
    if energy(high) > target:
        pv = clear * clearness ** high
        return pv * target / (np.sum(pv) * dt_hours)
    for _ in range(200):
        mid = 0.5 * (low + high)
        if energy(mid) > target:
            low = mid
        else:
            high = mid
        if high - low <= 1e-12:
            break
    power = 0.5 * (low + high)
    pv = clear * clearness ** power
    return pv * target / (np.sum(pv) * dt_hours)


def synthesize_profiles(steps: int = 35040, dt_hours: float = 0.25, load_kwh: float = 2774.0,
                        pv_wh_per_wp: float = 1020.0, start_day: int = 0,
                        seed: int = 0) -> Tuple[Profile, Profile]:
    """
    Generate a synthetic household load profile and a normalized PV profile.

    The load has a base level with morning and evening peaks and a winter uplift; the PV
    profile is a clear-sky envelope peaking near 1 W/Wp, attenuated by daily clearness with
    at least one clear day in every seven. Annual targets are pro-rated to the span of the
    profile; the PV target is met by darkening cloudy samples, so clear-day peaks stay at
    the clear-sky level whatever the span.

    Args:
        steps (int): Number of samples.
        dt_hours (float): Sample interval in hours.
        load_kwh (float): Annual household consumption in kWh.
        pv_wh_per_wp (float): Annual specific PV yield in Wh/Wp.
        start_day (int): Day of year of the first sample.
        seed (int): Random seed.

    Returns:
        Tuple[Profile, Profile]: ``(load, pv)``.

    Raises:
        ProfileError: On non-positive targets, a span without daylight, or a scaled
            clear-sky profile above the hard PV limit.
    """
    if steps < 1 or not dt_hours > 0:
        raise ProfileError("steps and dt_hours must be positive")
    if not load_kwh > 0 or not pv_wh_per_wp > 0:
        raise ProfileError("annual energy targets must be positive")

    rng = np.random.default_rng(seed)
    hours = start_day * 24.0 + np.arange(steps) * dt_hours
    share = steps * dt_hours / HOURS_PER_YEAR

    load = _load_shape(hours, rng)
    load *= load_kwh * 1000.0 * share / (load.sum() * dt_hours)

    clear = _pv_clear_sky(hours)
    if clear.sum() == 0:
        raise ProfileError("profile span contains no daylight")
    pv = _calibrate_clearness(clear, _clearness(hours, rng), pv_wh_per_wp * share, dt_hours)

    label = f"synthetic day {start_day}"
    return (Profile(ProfileKind.LOAD, load, dt_hours, label),
            Profile(ProfileKind.PV_NORMALIZED, pv, dt_hours, label))

"""Loaders turning NHL, MLB and plain-text inputs into prediction tasks."""

from __future__ import annotations

import re

import numpy as np
import pandas as pd
from sklearn.feature_extraction.text import CountVectorizer

from schemas import PredictionTask
from utils.tabular import DatasetError, read_table, require_columns

NHL_COLUMNS = ["season", "player_id", "position", "goals"]
MLB_COLUMNS = ["date", "player_id", "role", "count"]

POSITION_CODES = {
    "defender": {"d", "defender", "defense", "defenseman"},
    "center": {"c", "center", "centre"},
    "winger": {"w", "lw", "rw", "l", "r", "winger", "left wing", "right wing"},
}
ROLE_CODES = {
    "batting": {"batting", "batter", "b", "hitter"},
    "pitching": {"pitching", "pitcher", "p"},
}

TOKEN_PATTERN = r"(?u)\b[^\W\d_]{2,}\b"
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


class TaskSkipped(ValueError):
    """Raised when an input is valid but unsuitable for a task (too short, no vocabulary)."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def load_nhl(csv_path, position: str = "all") -> list[PredictionTask]:
    """One task per consecutive-season pair over players present in both seasons."""
    df = read_table(csv_path)
    require_columns(df, NHL_COLUMNS, source=str(csv_path))
    df = df.dropna(subset=NHL_COLUMNS).copy()
    df["player_id"] = df["player_id"].astype(str)
    df["goals"] = pd.to_numeric(df["goals"], errors="coerce")
    if df["goals"].isna().any() or (df["goals"] < 0).any():
        raise DatasetError("goals must be nonnegative integers")
    if position != "all":
        if position not in POSITION_CODES:
            raise DatasetError(f"unknown position filter: {position}")
        codes = df["position"].astype(str).str.strip().str.lower()
        df = df[codes.isin(POSITION_CODES[position])]
    if df.empty:
        raise DatasetError(f"no NHL rows left after position filter {position!r}")

    totals = df.groupby(["season", "player_id"])["goals"].sum().astype(np.int64)
    seasons = sorted(totals.index.get_level_values("season").unique())
    tasks: list[PredictionTask] = []
    for s1, s2 in zip(seasons, seasons[1:]):
        a, b = totals.loc[s1], totals.loc[s2]
        shared = sorted(set(a.index) & set(b.index))
        if not shared:
            continue
        tasks.append(
            PredictionTask(
                task_id=f"nhl:{s1}->{s2}:{position}",
                xs=a.loc[shared].to_numpy(),
                ys=b.loc[shared].to_numpy(),
                n_y=1.0,
                meta={"players": shared},
            )
        )
    if not tasks:
        raise DatasetError("no players shared between consecutive seasons")
    return tasks


def _normalize_role(value: str) -> str:
    v = str(value).strip().lower()
    for role, codes in ROLE_CODES.items():
        if v in codes:
            return role
    raise DatasetError(f"unknown role {value!r}; expected batting or pitching")


def load_mlb(csv_path, split: str = "calendar") -> dict[str, list[PredictionTask]]:
    """Per-season first-half vs second-half tasks, batting and pitching kept apart."""
    df = read_table(csv_path)
    require_columns(df, MLB_COLUMNS, source=str(csv_path))
    df = df.dropna(subset=MLB_COLUMNS).copy()
    df["date"] = pd.to_datetime(df["date"], errors="coerce")
    if df["date"].isna().any():
        raise DatasetError("unparseable dates in MLB input")
    df["count"] = pd.to_numeric(df["count"], errors="coerce")
    if df["count"].isna().any() or (df["count"] < 0).any():
        raise DatasetError("count must be nonnegative")
    df["player_id"] = df["player_id"].astype(str)
    df["role"] = df["role"].map(_normalize_role)
    df["season"] = df["season"].astype(int) if "season" in df.columns else df["date"].dt.year

    out: dict[str, list[PredictionTask]] = {"batting": [], "pitching": []}
    for season, part in sorted(df.groupby("season"), key=lambda kv: kv[0]):
        roles = part.groupby("player_id")["role"].nunique()
        if (roles > 1).any():
            both = sorted(roles[roles > 1].index)[:5]
            raise DatasetError(f"season {season}: players listed in both roles: {both}")
        first, last = part["date"].min(), part["date"].max()
        if first == last:
            raise DatasetError(f"season {season} has no midpoint (single event date)")
        if split == "calendar":
            midpoint = first + (last - first) / 2
        elif split == "median_event":
            midpoint = part["date"].sort_values().iloc[(len(part) - 1) // 2]
        else:
            raise DatasetError(f"unknown split rule: {split}")
        part = part.assign(half=np.where(part["date"] <= midpoint, "x", "y"))
        for role, grp in part.groupby("role"):
            table = grp.pivot_table(index="player_id", columns="half", values="count", aggfunc="sum", fill_value=0)
            table = table.reindex(columns=["x", "y"], fill_value=0).sort_index()
            out[role].append(
                PredictionTask(
                    task_id=f"mlb:{season}:{role}",
                    xs=table["x"].to_numpy(dtype=np.int64),
                    ys=table["y"].to_numpy(dtype=np.int64),
                    n_y=1.0,
                    meta={"players": list(table.index), "midpoint": str(midpoint.date())},
                )
            )
    if not out["batting"] and not out["pitching"]:
        raise DatasetError("MLB input produced no tasks")
    return out


def split_sentences(text: str) -> list[str]:
    return [s for s in _SENTENCE_SPLIT.split((text or "").strip()) if s.strip()]


def make_vectorizer(stop_words="english") -> CountVectorizer:
    return CountVectorizer(stop_words=stop_words, lowercase=True, token_pattern=TOKEN_PATTERN)


def load_wordfreq(
    text: str,
    head_tokens: int = 2000,
    stop_words="english",
    *,
    task_id: str = "doc",
) -> PredictionTask:
    """Head section of ~head_tokens tokens as X, the rest as Y, vocabulary over the whole text."""
    sentences = split_sentences(text)
    analyzer = make_vectorizer(stop_words).build_analyzer()
    lengths = [len(analyzer(s)) for s in sentences]
    if sum(lengths) < head_tokens:
        raise TaskSkipped(f"{task_id}: {sum(lengths)} tokens, need at least {head_tokens}")

    seen, cut = 0, 0
    while cut < len(sentences) and seen < head_tokens:
        seen += lengths[cut]
        cut += 1
    head, tail = sentences[:cut], sentences[cut:]
    if not tail:
        raise TaskSkipped(f"{task_id}: no sentences left after the head section")

    vec = make_vectorizer(stop_words)
    try:
        vec.fit([" ".join(sentences)])
    except ValueError as e:
        raise TaskSkipped(f"{task_id}: empty vocabulary ({e})") from e
    counts = vec.transform([" ".join(head), " ".join(tail)]).toarray()
    vocab = vec.get_feature_names_out()
    return PredictionTask(
        task_id=task_id,
        xs=counts[0],
        ys=counts[1],
        n_y=len(tail) / len(head),
        meta={"vocabulary": [str(w) for w in vocab], "head_sentences": len(head), "tail_sentences": len(tail)},
    )

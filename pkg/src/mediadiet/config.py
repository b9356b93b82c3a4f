"""Declarative pipeline configuration.

Plain JSON; every referenced path must exist at validation time, and every
output embeds the config hash so artifacts are traceable to the exact run
definition that produced them.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .gateway import BACKEND_KINDS, BackendRef

ALL_STAGES = ("ingest", "train", "score", "join", "analyze", "explain", "rolling")


def config_hash(raw: dict) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _require(raw: dict, name: str, kind=None):
    if name not in raw:
        raise ConfigError(name, "missing")
    value = raw[name]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(name, f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def _existing_path(base: Path, field_name: str, value: str) -> Path:
    path = (base / value).resolve() if not Path(value).is_absolute() else Path(value)
    if not path.exists():
        raise ConfigError(field_name, f"path does not exist: {path}")
    return path


def parse_backend(raw: dict, field_name: str, base: Path,
                  must_exist: bool = True) -> BackendRef:
    for key in ("kind", "endpoint_or_path", "model_tag"):
        if key not in raw:
            raise ConfigError(f"{field_name}.{key}", "missing")
    if raw["kind"] not in BACKEND_KINDS:
        raise ConfigError(f"{field_name}.kind",
                          f"must be one of {BACKEND_KINDS}, got {raw['kind']!r}")
    target = raw["endpoint_or_path"]
    if raw["kind"] != "neural_remote" and must_exist:
        target = str(_existing_path(base, f"{field_name}.endpoint_or_path", target))
    return BackendRef(kind=raw["kind"], endpoint_or_path=target,
                      model_tag=raw["model_tag"])


@dataclass
class PipelineConfig:
    raw: dict
    base_dir: Path
    output_dir: Path
    seed: int
    hash: str
    ingest: list = field(default_factory=list)
    train: list = field(default_factory=list)
    diets: list = field(default_factory=list)  # (diet_id, raw backend dict)
    base_backend_raw: dict | None = None
    prompts_path: Path | None = None
    synonym_lexicon_path: Path | None = None
    survey: dict | None = None
    questions_path: Path | None = None
    analysis: dict = field(default_factory=dict)
    explain: dict | None = None
    rolling: dict | None = None

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError("config", f"file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"invalid JSON: {e}")
        return cls.from_dict(raw, base_dir=path.parent)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str | Path = ".") -> "PipelineConfig":
        base = Path(base_dir).resolve()
        output_dir = Path(_require(raw, "output_dir", str))
        if not output_dir.is_absolute():
            output_dir = base / output_dir
        seed = int(raw.get("seed", 0))
        cfg = cls(raw=raw, base_dir=base, output_dir=output_dir, seed=seed,
                  hash=config_hash(raw))

        for i, item in enumerate(raw.get("ingest", [])):
            manifest = _existing_path(base, f"ingest[{i}].manifest",
                                      _require(item, "manifest", str))
            docs = _existing_path(base, f"ingest[{i}].input",
                                  _require(item, "input", str))
            kw = item.get("keyword_filter")
            kw_path = _existing_path(base, f"ingest[{i}].keyword_filter", kw) if kw else None
            cfg.ingest.append({"manifest": manifest, "input": docs,
                               "keyword_filter": kw_path})

        for i, item in enumerate(raw.get("train", [])):
            cfg.train.append({
                "diet_id": _require(item, "diet_id", str),
                "dataset": _require(item, "dataset", str),
                "order": int(item.get("order", 3)),
                "discount": float(item.get("discount", 0.75)),
            })

        for i, item in enumerate(raw.get("diets", [])):
            diet_id = _require(item, "diet_id", str)
            backend = _require(item, "backend", dict)
            parse_backend(backend, f"diets[{i}].backend", base)
            cfg.diets.append((diet_id, backend))

        if "base_backend" in raw:
            parse_backend(raw["base_backend"], "base_backend", base)
            cfg.base_backend_raw = raw["base_backend"]

        if "prompts" in raw:
            cfg.prompts_path = _existing_path(base, "prompts", raw["prompts"])
        if "synonym_lexicon" in raw:
            cfg.synonym_lexicon_path = _existing_path(base, "synonym_lexicon",
                                                      raw["synonym_lexicon"])
        if "questions" in raw:
            cfg.questions_path = _existing_path(base, "questions", raw["questions"])

        if "survey" in raw:
            survey = _require(raw, "survey", dict)
            if "synthetic" in survey:
                synth = survey["synthetic"]
                if "coefficients" not in synth:
                    raise ConfigError("survey.synthetic.coefficients", "missing")
            elif "waves_csv" in survey:
                _existing_path(base, "survey.waves_csv", survey["waves_csv"])
                if "mapping" in survey:
                    mapping = survey["mapping"]
                    if not isinstance(mapping, dict):
                        raise ConfigError("survey.mapping", "expected object")
            else:
                raise ConfigError("survey", "needs either 'synthetic' or 'waves_csv'")
            cfg.survey = survey

        cfg.analysis = raw.get("analysis", {})
        if "model" in cfg.analysis and cfg.analysis["model"] not in ("model1", "model2"):
            raise ConfigError("analysis.model", f"unknown model {cfg.analysis['model']!r}")
        cfg.explain = raw.get("explain")
        cfg.rolling = raw.get("rolling")
        return cfg

    def require_for_stage(self, stage: str):
        """Field presence checks that depend on the requested stages."""
        need = {
            "ingest": [("ingest", self.ingest)],
            "train": [("train", self.train)],
            "score": [("prompts", self.prompts_path),
                      ("base_backend", self.base_backend_raw)],
            "join": [("survey", self.survey)],
            "analyze": [],
            "explain": [("explain", self.explain)],
            "rolling": [("rolling", self.rolling)],
        }
        for field_name, value in need.get(stage, []):
            if not value:
                raise ConfigError(field_name, f"required by stage {stage!r}")

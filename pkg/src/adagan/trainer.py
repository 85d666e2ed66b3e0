"""Training orchestration: config, the alternating loop, snapshots, resume.

One iteration shows the discriminator a real batch and a generated
batch (both augmented at the current strength p), updates it on the
logistic loss plus the interval-scaled gradient penalty on lazy ticks,
then updates the generator through freshly augmented fakes plus the
interval-scaled path-length penalty on its own lazy ticks. Overfitting
heuristics are refreshed every few iterations and fed to the controller
that moves p. Every random draw comes from a counter-based stream keyed
by purpose and iteration, so a run is a pure function of (config, seed)
and resume from a checkpoint is bit-exact.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ada, datakit, metrics as metrics_mod, objectives, rng, tensor as tt
from .ada import ControllerState, ScoreSummary
from .checkpoint import load_checkpoint, save_checkpoint
from .datakit import DataError, RecordReader, float_to_pixels, pixels_to_float
from .discriminator import init_discriminator_params, score
from .generator import (
    SynthesisConfig,
    default_channels,
    init_generator_params,
    map_latent,
    synthesize,
)
from .objectives import LazySchedule, PathLengthState, lazy_gate
from .optim import Adam
from .tensor import Tensor


class ConfigError(ValueError):
    """Unusable configuration (unknown key, bad value, missing input)."""


class NumericalAbort(ArithmeticError):
    """Training produced a non-finite loss; diagnostic checkpoint written."""


# keys that may differ between a checkpoint's config and a resumed run
NON_STRUCTURAL_KEYS = ("total_kimg", "out_dir")

REPORT_COLUMNS = ("tick", "kimg", "fid", "kid", "p", "r_t", "r_v", "loss_g", "loss_d")
TRAINLOG_COLUMNS = ("iter", "kimg", "loss_d", "loss_g", "r1", "pl", "p", "r_t", "r_v")


@dataclass
class TrainConfig:
    """Every knob of one training run; the seed fixes all randomness."""

    data: str = ""
    out_dir: str = "run"
    resolution: int = 32
    img_channels: int = 1
    batch_size: int = 16
    total_kimg: float = 50.0
    tick_kimg: float = 1.0
    snapshot_every_ticks: int = 10
    lr_g: float = 2e-3
    lr_d: float = 2e-3
    adam_beta1: float = 0.0
    adam_beta2: float = 0.99
    adam_eps: float = 1e-8
    z_dim: int = 64
    w_dim: int = 64
    mapping_depth: int = 4
    channels: str = ""
    ada_mode: str = "rt"
    ada_target: float = 0.6
    ada_horizon: int = 100_000
    ada_p_max: float = 0.85
    ada_interval: int = 4
    ada_p_init: float = 0.0
    r1_gamma: float = 1.0
    r1_interval: int = 16
    pl_weight: float = 2.0
    pl_interval: int = 16
    pl_decay: float = 0.99
    val_frac: float = 0.1
    seed: int = 0
    metrics_embedder: str = "pixels"
    metrics_n_gen: int = 512
    kid_block_size: int = 100
    kid_n_blocks: int = 10

    def validate(self) -> None:
        if not self.data:
            raise ConfigError("config key 'data' (record file path) is required")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if self.total_kimg < 0:
            raise ConfigError("total_kimg must be non-negative")
        if self.tick_kimg <= 0:
            raise ConfigError("tick_kimg must be positive")
        if self.ada_mode not in ("rt", "rv", "off"):
            raise ConfigError(f"ada_mode {self.ada_mode!r} not one of rt|rv|off")
        if not 0.0 <= self.val_frac < 1.0:
            raise ConfigError("val_frac must lie in [0, 1)")
        if self.metrics_embedder not in ("pixels", "randconv"):
            raise ConfigError(
                f"metrics_embedder {self.metrics_embedder!r} not one of pixels|randconv"
            )
        if self.ada_mode == "rv" and self.val_frac == 0.0:
            raise ConfigError("ada_mode rv needs a validation split (val_frac > 0)")

    def channel_map(self) -> dict[int, int]:
        if not self.channels:
            return default_channels(self.resolution)
        out = {}
        try:
            for part in self.channels.split(","):
                res_s, ch_s = part.split(":")
                out[int(res_s)] = int(ch_s)
        except ValueError as exc:
            raise ConfigError(f"bad channels string {self.channels!r}") from exc
        return out

    def synthesis(self) -> SynthesisConfig:
        return SynthesisConfig(
            target_resolution=self.resolution,
            channels=self.channel_map(),
            z_dim=self.z_dim,
            w_dim=self.w_dim,
            mapping_depth=self.mapping_depth,
            out_channels=self.img_channels,
        )

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            lines.append(f"{f.name} = {getattr(self, f.name)!r}"
                         if isinstance(getattr(self, f.name), str)
                         else f"{f.name} = {getattr(self, f.name)}")
        return "\n".join(lines) + "\n"

    def structural_digest(self) -> str:
        lines = [
            f"{f.name}={getattr(self, f.name)}"
            for f in dataclasses.fields(self)
            if f.name not in NON_STRUCTURAL_KEYS
        ]
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def _coerce(name: str, kind, raw: str):
    raw = raw.strip()
    if (raw.startswith("'") and raw.endswith("'")) or (
        raw.startswith('"') and raw.endswith('"')
    ):
        raw = raw[1:-1]
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"config key {name}: cannot parse {raw!r}") from exc


def parse_config_text(text: str, base: TrainConfig | None = None) -> TrainConfig:
    """Parse `key = value` lines ('#' comments allowed) over defaults."""
    cfg = dataclasses.replace(base) if base else TrainConfig()
    defaults = TrainConfig()
    types = {f.name: type(getattr(defaults, f.name)) for f in dataclasses.fields(TrainConfig)}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in types:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        setattr(cfg, key, _coerce(key, types[key], raw))
    return cfg


def load_config(path, overrides: dict[str, str] | None = None) -> TrainConfig:
    try:
        text = Path(path).read_text() if path else ""
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    cfg = parse_config_text(text)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg


def apply_overrides(cfg: TrainConfig, overrides: dict[str, str]) -> TrainConfig:
    types = {f.name: type(getattr(TrainConfig(), f.name)) for f in dataclasses.fields(TrainConfig)}
    out = dataclasses.replace(cfg)
    for key, raw in overrides.items():
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(out, key, _coerce(key, types[key], str(raw)))
    return out


# ---------------------------------------------------------------------------
# formatting


def _fmt(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, columns, rows) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c)) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# transfer


@dataclass(frozen=True)
class TransferManifest:
    copied: tuple[str, ...]
    reinitialized: tuple[str, ...]

    def to_json(self) -> str:
        return json.dumps(
            {"copied": list(self.copied), "reinitialized": list(self.reinitialized)},
            indent=2,
            sort_keys=True,
        )


def transfer_init(
    source, target_config: TrainConfig
) -> tuple[dict[str, Tensor], dict[str, Tensor], TransferManifest]:
    """Initialize target params, copying every (name, shape) match.

    `source` is a checkpoint path or a loaded (meta, tensors) pair.
    Optimizer moments and controller state are not carried over.
    """
    if isinstance(source, tuple):
        _, tensors = source
    else:
        _, tensors = load_checkpoint(source)
    scfg = target_config.synthesis()
    gparams = init_generator_params(scfg, target_config.seed)
    dparams = init_discriminator_params(scfg, target_config.seed)
    copied, reinit = [], []
    for prefix, params in (("g", gparams), ("d", dparams)):
        for name, p in params.items():
            full = f"{prefix}.{name}"
            src = tensors.get(full)
            if src is not None and src.shape == p.shape:
                p.data[...] = src
                copied.append(full)
            else:
                reinit.append(full)
    return gparams, dparams, TransferManifest(tuple(copied), tuple(reinit))


# ---------------------------------------------------------------------------
# trainer


@dataclass
class RunResult:
    out_dir: str
    final_checkpoint: str
    report_path: str
    trainlog_path: str
    report_rows: list
    figure_paths: list


class Trainer:
    def __init__(
        self,
        cfg: TrainConfig,
        resume: tuple[dict, dict] | None = None,
        initial_params: tuple[dict, dict] | None = None,
    ):
        cfg.validate()
        self.cfg = cfg
        self.scfg = cfg.synthesis()
        self.out_dir = Path(cfg.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

        reader = RecordReader(cfg.data)
        if reader.resolution != cfg.resolution:
            raise DataError(
                f"record resolution {reader.resolution} != config resolution"
                f" {cfg.resolution}"
            )
        if reader.channels != cfg.img_channels:
            raise DataError(
                f"record channels {reader.channels} != config img_channels"
                f" {cfg.img_channels}"
            )
        self.labels, self.pixels = reader.load_all()
        reader.close()
        self.train_ids, self.val_ids = datakit.split(cfg.data, cfg.val_frac, cfg.seed)
        if len(self.train_ids) == 0:
            raise DataError("empty training split")

        if resume is not None:
            meta, tensors = resume
            if meta["config_digest"] != cfg.structural_digest():
                raise ConfigError(
                    "checkpoint config digest does not match the resumed config"
                )
            self.gparams = init_generator_params(self.scfg, cfg.seed)
            self.dparams = init_discriminator_params(self.scfg, cfg.seed)
            for prefix, params in (("g", self.gparams), ("d", self.dparams)):
                for name, p in params.items():
                    p.data[...] = tensors[f"{prefix}.{name}"]
            self.adam_g = Adam(self.gparams, cfg.lr_g, cfg.adam_beta1, cfg.adam_beta2,
                               cfg.adam_eps)
            self.adam_d = Adam(self.dparams, cfg.lr_d, cfg.adam_beta1, cfg.adam_beta2,
                               cfg.adam_eps)
            self.adam_g.load_state_arrays("optg", tensors, meta["adam_g_t"])
            self.adam_d.load_state_arrays("optd", tensors, meta["adam_d_t"])
            c = meta["controller"]
            self.controller = ControllerState(
                p=c["p"], target=c["target"], mode=c["mode"],
                images_seen_since_update=c["images_seen_since_update"],
                integration_horizon_images=c["integration_horizon_images"],
                p_max=c["p_max"],
            )
            self.pl_state = PathLengthState(
                ema_a=meta["path_length"]["ema_a"], decay=meta["path_length"]["decay"]
            )
            self.nimg = int(meta["nimg"])
            self.tick = int(meta["tick"])
            self._score_buf = (
                [tensors["state.score_buf"]] if tensors["state.score_buf"].size else []
            )
            self._fake_means = [float(v) for v in tensors["state.fake_means"]]
        else:
            if initial_params is not None:
                self.gparams, self.dparams = initial_params
            else:
                self.gparams = init_generator_params(self.scfg, cfg.seed)
                self.dparams = init_discriminator_params(self.scfg, cfg.seed)
            self.adam_g = Adam(self.gparams, cfg.lr_g, cfg.adam_beta1, cfg.adam_beta2,
                               cfg.adam_eps)
            self.adam_d = Adam(self.dparams, cfg.lr_d, cfg.adam_beta1, cfg.adam_beta2,
                               cfg.adam_eps)
            self.controller = ControllerState(
                p=cfg.ada_p_init, target=cfg.ada_target,
                mode=cfg.ada_mode if cfg.ada_mode != "off" else "rt",
                integration_horizon_images=cfg.ada_horizon, p_max=cfg.ada_p_max,
            )
            self.pl_state = PathLengthState(decay=cfg.pl_decay)
            self.nimg = 0
            self.tick = 0
            self._score_buf: list[np.ndarray] = []
            self._fake_means: list[float] = []

        self.embedder = metrics_mod.Embedder(kind=cfg.metrics_embedder, seed=cfg.seed)
        self._real_features = None
        self.report_rows: list[dict] = []
        self.trainlog_rows: list[dict] = []
        self._last = {"loss_d": None, "loss_g": None, "r_t": None, "r_v": None}

    # -- helpers ----------------------------------------------------------

    def _d_requires_grad(self, flag: bool) -> None:
        for p in self.dparams.values():
            p.requires_grad = flag

    def real_batch(self, iteration: int) -> np.ndarray:
        g = rng.stream(self.cfg.seed, "data", iteration)
        sel = self.train_ids[g.integers(0, len(self.train_ids), self.cfg.batch_size)]
        return pixels_to_float(self.pixels[sel])

    def real_features(self) -> np.ndarray:
        if self._real_features is None:
            self._real_features = metrics_mod.embed(
                pixels_to_float(self.pixels), self.embedder
            )
        return self._real_features

    def generate_images(self, n: int, z_tag: tuple, noise_tag: tuple) -> np.ndarray:
        """n images as float arrays, without recording gradients."""
        cfg = self.cfg
        out = []
        done = 0
        batch_index = 0
        with tt.no_record():
            while done < n:
                b = min(cfg.batch_size, n - done)
                z = rng.stream(cfg.seed, *z_tag, batch_index).standard_normal(
                    (b, cfg.z_dim)
                )
                w = map_latent(Tensor(z), self.gparams)
                imgs = synthesize(
                    w, rng.derive_key(cfg.seed, *noise_tag, batch_index) % (2**63),
                    self.gparams, self.scfg,
                )
                out.append(imgs.data)
                done += b
                batch_index += 1
        return np.concatenate(out, axis=0)

    def metrics_row(self, tick: int) -> tuple[float, float]:
        cfg = self.cfg
        gen = self.generate_images(
            cfg.metrics_n_gen, ("metrics.z", tick), ("metrics.noise", tick)
        )
        gen_feats = metrics_mod.embed(gen, self.embedder)
        real_feats = self.real_features()
        fid_v = metrics_mod.fid(
            metrics_mod.gaussian_moments(real_feats),
            metrics_mod.gaussian_moments(gen_feats),
        )
        block = min(cfg.kid_block_size, len(real_feats), len(gen_feats))
        kid_v = metrics_mod.kid(
            real_feats, gen_feats, block_size=block, n_blocks=cfg.kid_n_blocks,
            seed=rng.derive_key(cfg.seed, "kid", tick) % (2**63),
        )
        return fid_v, kid_v

    def _snapshot(self, tick: int) -> None:
        fid_v, kid_v = self.metrics_row(tick)
        row = {
            "tick": tick,
            "kimg": self.nimg / 1000.0,
            "fid": fid_v,
            "kid": kid_v,
            "p": self.controller.p,
            "r_t": self._last["r_t"],
            "r_v": self._last["r_v"],
            "loss_g": self._last["loss_g"],
            "loss_d": self._last["loss_d"],
        }
        self.report_rows.append(row)
        self.save_checkpoint(self.out_dir / f"ckpt-tick{tick:06d}.stck")

    def checkpoint_meta(self) -> dict:
        c = self.controller
        return {
            "config_digest": self.cfg.structural_digest(),
            "config_text": self.cfg.to_text(),
            "arch": {
                "resolution": self.cfg.resolution,
                "channels": {str(k): v for k, v in self.scfg.channels.items()},
                "z_dim": self.scfg.z_dim,
                "w_dim": self.scfg.w_dim,
                "mapping_depth": self.scfg.mapping_depth,
                "out_channels": self.scfg.out_channels,
            },
            "tick": self.tick,
            "nimg": self.nimg,
            "seed": self.cfg.seed,
            "adam_g_t": self.adam_g.t,
            "adam_d_t": self.adam_d.t,
            "controller": {
                "p": c.p, "target": c.target, "mode": c.mode,
                "images_seen_since_update": c.images_seen_since_update,
                "integration_horizon_images": c.integration_horizon_images,
                "p_max": c.p_max,
            },
            "path_length": {"ema_a": self.pl_state.ema_a, "decay": self.pl_state.decay},
        }

    def save_checkpoint(self, path) -> str:
        tensors: dict[str, np.ndarray] = {}
        for prefix, params in (("g", self.gparams), ("d", self.dparams)):
            for name, p in params.items():
                tensors[f"{prefix}.{name}"] = p.data
        tensors.update(self.adam_g.state_arrays("optg"))
        tensors.update(self.adam_d.state_arrays("optd"))
        # partially filled heuristic windows must survive a resume
        tensors["state.score_buf"] = (
            np.concatenate(self._score_buf) if self._score_buf else np.empty(0)
        )
        tensors["state.fake_means"] = np.asarray(self._fake_means, dtype=np.float64)
        save_checkpoint(path, self.checkpoint_meta(), tensors)
        return str(path)

    # -- one iteration ----------------------------------------------------

    def _heuristic_update(self, update_index: int) -> None:
        cfg = self.cfg
        real_scores = np.concatenate(self._score_buf)
        r_t = ada.heuristic_rt(real_scores)
        e_train = float(np.mean(real_scores))
        e_gen = float(np.mean(self._fake_means))
        r_v = None
        if len(self.val_ids) > 0:
            g = rng.stream(cfg.seed, "val", update_index)
            sel = self.val_ids[g.integers(0, len(self.val_ids), cfg.batch_size)]
            with tt.no_record():
                val_imgs = ada.augment_batch(
                    Tensor(pixels_to_float(self.pixels[sel])),
                    self.controller.p,
                    rng.derive_key(cfg.seed, "aug.val", update_index) % (2**63),
                )
                e_val = float(np.mean(score(val_imgs, self.dparams, self.scfg).data))
            try:
                r_v = ada.heuristic_rv(
                    ScoreSummary(e_train, e_val, e_gen, r_t)
                )
            except ada.DegenerateScores:
                r_v = None
        self._last["r_t"] = r_t
        self._last["r_v"] = r_v
        if cfg.ada_mode != "off":
            driver = r_t if cfg.ada_mode == "rt" else r_v
            if driver is not None:
                images = self.controller.images_seen_since_update
                self.controller = ada.controller_step(self.controller, driver, images)
        self._score_buf.clear()
        self._fake_means.clear()

    def _iteration(self, iteration: int) -> None:
        cfg = self.cfg
        batch = cfg.batch_size
        p = self.controller.p
        seed = cfg.seed
        r1_tick = lazy_gate(LazySchedule(cfg.r1_interval, iteration))
        pl_tick = lazy_gate(LazySchedule(cfg.pl_interval, iteration))

        reals = self.real_batch(iteration)
        z = rng.stream(seed, "latent", iteration).standard_normal((batch, cfg.z_dim))
        w = map_latent(Tensor(z), self.gparams)
        fakes = synthesize(
            w, rng.derive_key(seed, "noise", iteration) % (2**63),
            self.gparams, self.scfg,
        )

        # discriminator step (generator output enters detached)
        real_leaf = Tensor(reals, requires_grad=r1_tick)
        aug_reals = ada.augment_batch(
            real_leaf, p, rng.derive_key(seed, "aug.dr", iteration) % (2**63)
        )
        aug_fakes = ada.augment_batch(
            fakes.detach(), p, rng.derive_key(seed, "aug.df", iteration) % (2**63)
        )
        scores = score(tt.concat([aug_reals, aug_fakes], 0), self.dparams, self.scfg)
        real_scores = tt.slice_axis(scores, 0, 0, batch)
        fake_scores = tt.slice_axis(scores, 0, batch, batch)
        d_loss = objectives.loss_d(real_scores, fake_scores)
        r1_value = None
        d_total = d_loss
        if r1_tick and cfg.r1_gamma > 0:
            (gx,) = tt.grad_of(tt.tsum(real_scores), [real_leaf], create_graph=True)
            r1 = tt.scale(tt.tsum(tt.square(gx)), cfg.r1_gamma / (2.0 * batch))
            r1_value = float(r1.data)
            d_total = tt.add(d_loss, tt.scale(r1, float(cfg.r1_interval)))
        self.adam_d.zero_grad()
        d_total.backward()
        self.adam_d.step()
        d_loss_v = float(d_loss.data)
        real_scores_v = real_scores.data.copy()
        fake_mean_v = float(np.mean(fake_scores.data))
        # release the discriminator-step graph before building the next one
        del scores, real_scores, fake_scores, d_loss, d_total, aug_reals, aug_fakes
        del real_leaf

        # generator step (discriminator frozen, gradients flow through it)
        aug_fakes_g = ada.augment_batch(
            fakes, p, rng.derive_key(seed, "aug.gf", iteration) % (2**63)
        )
        g_scores = score(aug_fakes_g, self.dparams, self.scfg)
        g_loss = objectives.loss_g(g_scores)
        pl_value = None
        g_total = g_loss
        if pl_tick and cfg.pl_weight > 0:
            w_leaf = Tensor(w.data, requires_grad=True)
            noise_key = rng.derive_key(seed, "pl.noise", iteration) % (2**63)

            def run_synthesis(wl):
                return synthesize(wl, noise_key, self.gparams, self.scfg)

            pl, self.pl_state = objectives.path_length_penalty(
                run_synthesis, w_leaf, self.pl_state,
                rng.stream(seed, "pl.dir", iteration),
            )
            pl_value = float(pl.data)
            g_total = tt.add(
                g_loss, tt.scale(pl, cfg.pl_weight * float(cfg.pl_interval))
            )
        self._d_requires_grad(False)
        self.adam_g.zero_grad()
        g_total.backward()
        self.adam_g.step()
        self._d_requires_grad(True)
        g_loss_v = float(g_loss.data)
        del g_scores, g_loss, g_total, aug_fakes_g, fakes

        if not (np.isfinite(d_loss_v) and np.isfinite(g_loss_v)):
            raise tt.NonFiniteError(
                f"non-finite loss at iteration {iteration}:"
                f" d={d_loss_v} g={g_loss_v}"
            )
        self._last["loss_d"] = d_loss_v
        self._last["loss_g"] = g_loss_v

        self._score_buf.append(real_scores_v)
        self._fake_means.append(fake_mean_v)
        self.controller = dataclasses.replace(
            self.controller,
            images_seen_since_update=self.controller.images_seen_since_update + batch,
        )
        self.nimg += batch
        if (iteration + 1) % cfg.ada_interval == 0:
            self._heuristic_update((iteration + 1) // cfg.ada_interval)
        self.trainlog_rows.append(
            {
                "iter": iteration,
                "kimg": self.nimg / 1000.0,
                "loss_d": d_loss_v,
                "loss_g": g_loss_v,
                "r1": r1_value,
                "pl": pl_value,
                "p": self.controller.p,
                "r_t": self._last["r_t"],
                "r_v": self._last["r_v"],
            }
        )

    # -- run --------------------------------------------------------------

    def run(self, render_figures: bool = True) -> RunResult:
        cfg = self.cfg
        total_images = int(round(cfg.total_kimg * 1000))
        tick_images = int(round(cfg.tick_kimg * 1000))
        if self.nimg == 0:
            self._snapshot(0)
        try:
            while self.nimg < total_images:
                self._iteration(self.nimg // cfg.batch_size)
                new_tick = self.nimg // tick_images
                if new_tick > self.tick:
                    self.tick = new_tick
                    done = self.nimg >= total_images
                    if self.tick % cfg.snapshot_every_ticks == 0 or done:
                        self._snapshot(self.tick)
        except tt.NonFiniteError as exc:
            self.save_checkpoint(self.out_dir / "ckpt-abort.stck")
            self._write_outputs(render_figures=False)
            raise NumericalAbort(str(exc)) from exc
        final = self.save_checkpoint(self.out_dir / "ckpt-final.stck")
        report, trainlog, figures = self._write_outputs(render_figures)
        return RunResult(
            out_dir=str(self.out_dir),
            final_checkpoint=final,
            report_path=report,
            trainlog_path=trainlog,
            report_rows=self.report_rows,
            figure_paths=figures,
        )

    def _write_outputs(self, render_figures: bool):
        report = self.out_dir / "report.csv"
        trainlog = self.out_dir / "trainlog.csv"
        write_csv(report, REPORT_COLUMNS, self.report_rows)
        write_csv(trainlog, TRAINLOG_COLUMNS, self.trainlog_rows)
        figure_paths: list[str] = []
        if render_figures:
            from . import figures

            figure_paths = figures.save_training_figures(
                self.report_rows, self.trainlog_rows, self.out_dir
            )
        return str(report), str(trainlog), figure_paths


def train(config: TrainConfig, initial_params=None) -> RunResult:
    """Run a full training loop; returns checkpoint and report locations."""
    return Trainer(config, initial_params=initial_params).run()


def resume(checkpoint_path, overrides: dict[str, str] | None = None) -> RunResult:
    """Continue a run from its checkpoint; only the budget and output
    directory may be overridden."""
    meta, tensors = load_checkpoint(checkpoint_path)
    cfg = parse_config_text(meta["config_text"])
    if overrides:
        bad = set(overrides) - set(NON_STRUCTURAL_KEYS)
        if bad:
            raise ConfigError(
                f"resume can only override {NON_STRUCTURAL_KEYS}, got {sorted(bad)}"
            )
        cfg = apply_overrides(cfg, overrides)
    return Trainer(cfg, resume=(meta, tensors)).run()


# ---------------------------------------------------------------------------
# standalone evaluation and sampling


def params_from_checkpoint(source) -> tuple[dict, dict, SynthesisConfig, dict]:
    """(gparams, dparams, synthesis config, meta) from a checkpoint."""
    meta, tensors = source if isinstance(source, tuple) else load_checkpoint(source)
    arch = meta["arch"]
    scfg = SynthesisConfig(
        target_resolution=arch["resolution"],
        channels={int(k): v for k, v in arch["channels"].items()},
        z_dim=arch["z_dim"],
        w_dim=arch["w_dim"],
        mapping_depth=arch["mapping_depth"],
        out_channels=arch["out_channels"],
    )
    gparams = {
        name[2:]: Tensor(arr, requires_grad=True)
        for name, arr in tensors.items()
        if name.startswith("g.")
    }
    dparams = {
        name[2:]: Tensor(arr, requires_grad=True)
        for name, arr in tensors.items()
        if name.startswith("d.")
    }
    return gparams, dparams, scfg, meta


def snapshot_metrics(
    checkpoint_path, record_file, embedder: metrics_mod.Embedder,
    n_gen: int, seed: int,
) -> dict:
    """One evaluation row for a stored checkpoint against a record file."""
    gparams, _, scfg, meta = params_from_checkpoint(checkpoint_path)
    reader = RecordReader(record_file)
    _, pixels = reader.load_all()
    reader.close()
    real_feats = metrics_mod.embed(pixels_to_float(pixels), embedder)
    gen = []
    done, batch_index, batch = 0, 0, 16
    with tt.no_record():
        while done < n_gen:
            b = min(batch, n_gen - done)
            z = rng.stream(seed, "metrics.z", batch_index).standard_normal((b, scfg.z_dim))
            w = map_latent(Tensor(z), gparams)
            gen.append(
                synthesize(
                    w, rng.derive_key(seed, "metrics.noise", batch_index) % (2**63),
                    gparams, scfg,
                ).data
            )
            done += b
            batch_index += 1
    gen_feats = metrics_mod.embed(np.concatenate(gen, axis=0), embedder)
    block = min(100, len(real_feats), len(gen_feats))
    if n_gen < 2 * block:
        raise ConfigError(f"n_gen must be at least twice the KID block size ({block})")
    fid_v = metrics_mod.fid(
        metrics_mod.gaussian_moments(real_feats),
        metrics_mod.gaussian_moments(gen_feats),
    )
    kid_v = metrics_mod.kid(
        real_feats, gen_feats, block_size=block,
        seed=rng.derive_key(seed, "kid") % (2**63),
    )
    return {
        "tick": meta["tick"],
        "fid": fid_v,
        "kid": kid_v,
        "embedder": embedder.kind,
        "n_real": len(real_feats),
        "n_gen": n_gen,
    }


def tile_grid(images: np.ndarray, n_rows: int, n_cols: int) -> np.ndarray:
    """(R·C, H, W, 1) u8 stack → (R·H, C·W) u8 montage."""
    n, h, w, _ = images.shape
    if n != n_rows * n_cols:
        raise ValueError("image count does not match grid shape")
    grid = images[:, :, :, 0].reshape(n_rows, n_cols, h, w)
    return grid.transpose(0, 2, 1, 3).reshape(n_rows * h, n_cols * w)


def generate_grid(checkpoint_path, n_rows: int, n_cols: int, seed: int, out_path) -> str:
    """Sample a grid of images from a checkpoint and write it as PGM."""
    if n_rows < 1 or n_cols < 1:
        raise ConfigError("grid dimensions must be positive")
    gparams, _, scfg, _ = params_from_checkpoint(checkpoint_path)
    n = n_rows * n_cols
    with tt.no_record():
        z = rng.stream(seed, "grid").standard_normal((n, scfg.z_dim))
        w = map_latent(Tensor(z), gparams)
        imgs = synthesize(
            w, rng.derive_key(seed, "grid.noise") % (2**63), gparams, scfg
        )
    datakit.write_pgm(out_path, tile_grid(float_to_pixels(imgs.data), n_rows, n_cols))
    return str(out_path)

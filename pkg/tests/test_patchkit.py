"""Exact resampling, budget fitting, and the patch container format."""

from __future__ import annotations

import io
import math
import random

import numpy as np
import pytest

from tabpix import (
    BadMagic,
    FitConfig,
    Image,
    PatchSeq,
    TruncatedFile,
    extract_patches,
    fit_grid,
    fit_resize,
    gamma_fit,
    read_patches,
    resize,
    write_patches,
)
from tabpix.patchkit import _resize_to, _s_fit

from oracles import resize_naive

CFG = FitConfig()


def gradient(w, h, seed=0):
    rng = np.random.default_rng(seed)
    return Image.from_array(rng.integers(0, 256, size=(h, w), dtype=np.uint8))


class TestResize:
    def test_two_by_two_half(self):
        img = Image(width=2, height=2, pixels=bytes([0, 0, 255, 255]))
        out = resize(img, 0.5)
        # mean 127.5 rounds half up
        assert (out.width, out.height, out.pixels) == (1, 1, b"\x80")

    def test_identity(self):
        img = gradient(7, 5)
        assert resize(img, 1.0) == img

    def test_floors_to_one_pixel(self):
        img = Image(width=3, height=3, pixels=bytes(range(9)))
        out = resize(img, 0.1)
        assert (out.width, out.height) == (1, 1)
        assert out.pixels == bytes([4])  # mean of 0..8

    def test_scale_domain(self):
        img = gradient(2, 2)
        for s in (0.0, -0.5, 1.5):
            with pytest.raises(ValueError):
                resize(img, s)

    def test_uniform_stays_uniform(self):
        img = Image(width=9, height=7, pixels=bytes([77]) * 63)
        for s in (0.9, 0.5, 0.17):
            assert set(resize(img, s).pixels) == {77}

    def test_matches_fraction_oracle(self):
        rnd = random.Random(6)
        for _ in range(40):
            w, h = rnd.randint(1, 12), rnd.randint(1, 12)
            out_w, out_h = rnd.randint(1, 15), rnd.randint(1, 15)
            pixels = [rnd.randrange(256) for _ in range(w * h)]
            arr = np.array(pixels, dtype=np.uint8).reshape(h, w)
            got = _resize_to(arr, out_w, out_h).flatten().tolist()
            assert got == resize_naive(pixels, w, h, out_w, out_h)


class TestFitGrid:
    def test_square_at_double_budget(self):
        # 1024x1024 has twice the pixel budget; fitting lands on 45x45
        assert fit_grid(1024, 1024, CFG) == (45, 45)

    def test_budget_holds_everywhere(self):
        rnd = random.Random(1)
        for _ in range(3000):
            h, w = rnd.randint(1, 10**6), rnd.randint(1, 10**6)
            rows, cols = fit_grid(h, w, CFG)
            assert rows >= 1 and cols >= 1
            assert rows * cols <= CFG.max_patches

    def test_extreme_aspect_clamps(self):
        rows, cols = fit_grid(2, 10**7, CFG)
        assert rows == 1 and 1 <= cols <= CFG.max_patches


class TestFitResize:
    def test_output_tiles_exactly(self):
        img = gradient(1024, 1024)
        out, rows, cols = fit_resize(img, CFG)
        assert (rows, cols) == (45, 45)
        assert (out.width, out.height) == (45 * 16, 45 * 16)
        assert len(extract_patches(out, 16).patches) == 2025

    def test_small_images_scale_up(self):
        img = gradient(10, 10)
        out, rows, cols = fit_resize(img, CFG)
        assert out.width == cols * 16 and out.height == rows * 16
        assert rows * cols <= CFG.max_patches


class TestGammaFit:
    def test_small_image_passes_through(self):
        img = gradient(640, 400)  # 40x25 patches = 1000, inside budget
        out, scale, truncated = gamma_fit(img, CFG)
        assert out == img and scale == 1.0 and truncated is False

    def test_fit_path_when_floor_allows(self):
        img = gradient(1024, 1024)
        out, scale, truncated = gamma_fit(img, CFG)
        assert (out.width, out.height) == (720, 720)
        assert scale == pytest.approx(math.sqrt(0.5))
        assert truncated is False

    def test_floor_truncates_columns(self):
        img = gradient(4000, 2000)
        out, scale, truncated = gamma_fit(img, CFG)
        # scaled to 1560x780; 49 patch rows leave 41 columns of budget
        assert scale == 0.39
        assert truncated is True
        assert (out.width, out.height) == (656, 780)
        n = len(extract_patches(out, 16).patches)
        assert n == 41 * 49 and n <= CFG.max_patches

    def test_kept_columns_are_the_leftmost(self):
        img = gradient(4000, 2000)
        out, _, _ = gamma_fit(img, CFG)
        scaled = _resize_to(img.to_array(), 1560, 780)
        assert out.to_array().tolist() == scaled[:, :656].tolist()

    def test_zero_floor_never_truncates(self):
        cfg = FitConfig(gamma=0.0)
        for w, h in ((4000, 2000), (30000, 40), (50, 9000)):
            _, _, truncated = gamma_fit(gradient(w, h), cfg)
            assert truncated is False

    def test_pathologically_tall_cuts_rows(self):
        cfg = FitConfig(gamma=1.0)
        img = gradient(8, 600_000, seed=3)
        out, scale, truncated = gamma_fit(img, cfg)
        assert scale == 1.0 and truncated is True
        assert (out.width, out.height) == (8, CFG.max_patches * 16)

    def test_budget_and_cut_flag_over_random_inputs(self):
        rnd = random.Random(4)
        for _ in range(60):
            w, h = rnd.randint(1, 4000), rnd.randint(1, 4000)
            gamma = rnd.choice([0.0, 0.2, 0.39, 0.7, 1.0])
            cfg = FitConfig(gamma=gamma)
            img = gradient(w, h, seed=w * h)
            out, scale, truncated = gamma_fit(img, cfg)
            seq = extract_patches(out, cfg.patch)
            assert len(seq.patches) <= cfg.max_patches
            if scale == 1.0 and not truncated and (out.width, out.height) == (w, h):
                continue  # pass-through
            ws = max(1, math.floor(scale * w))
            hs = max(1, math.floor(scale * h))
            if truncated:
                assert out.width < ws or out.height < hs
            else:
                pass  # fit path resnaps dims, no scaled reference to compare


class TestPatchContainer:
    def test_round_trip_and_size(self, tmp_path):
        seq = extract_patches(gradient(100, 40), 16)
        p = tmp_path / "a.tpx"
        write_patches(seq, p)
        n = len(seq.patches)
        assert p.stat().st_size == 16 + n * (4 + 256)
        assert read_patches(p) == seq

    def test_file_object_round_trip(self):
        seq = extract_patches(gradient(17, 33), 8)
        buf = io.BytesIO()
        write_patches(seq, buf)
        buf.seek(0)
        assert read_patches(buf) == seq

    def test_bad_magic(self):
        with pytest.raises(BadMagic):
            read_patches(io.BytesIO(b"TPX2" + bytes(12)))

    def test_truncated_and_overlong(self, tmp_path):
        seq = extract_patches(gradient(32, 32), 16)
        p = tmp_path / "b.tpx"
        write_patches(seq, p)
        data = p.read_bytes()
        with pytest.raises(TruncatedFile):
            read_patches(io.BytesIO(data[:-1]))
        with pytest.raises(TruncatedFile):
            read_patches(io.BytesIO(data + b"\x00"))
        with pytest.raises(TruncatedFile):
            read_patches(io.BytesIO(b"TPX1\x10\x00\x00"))

    def test_position_overflow(self):
        seq = PatchSeq(
            patch=1,
            grid_rows=70000,
            grid_cols=1,
            patches=(b"\x00",),
            positions=((70000, 0),),
        )
        with pytest.raises(ValueError):
            write_patches(seq, io.BytesIO())


class TestExtractPatches:
    def test_reassembly_matches_padded_source(self):
        img = gradient(37, 21, seed=9)
        seq = extract_patches(img, 16)
        assert (seq.grid_rows, seq.grid_cols) == (2, 3)
        canvas = np.zeros((32, 48), dtype=np.uint8)
        for (r, c), data in zip(seq.positions, seq.patches):
            canvas[r * 16 : (r + 1) * 16, c * 16 : (c + 1) * 16] = np.frombuffer(
                data, dtype=np.uint8
            ).reshape(16, 16)
        assert (canvas[:21, :37] == img.to_array()).all()
        assert (canvas[21:, :] == 255).all() and (canvas[:, 37:] == 255).all()

    def test_positions_row_major(self):
        seq = extract_patches(gradient(33, 17), 16)
        assert seq.positions == ((0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2))


class TestFitConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            FitConfig(gamma=1.5)
        with pytest.raises(ValueError):
            FitConfig(max_patches=0)
        with pytest.raises(ValueError):
            FitConfig(patch=0)

    def test_budget(self):
        assert CFG.budget_px() == 524_288

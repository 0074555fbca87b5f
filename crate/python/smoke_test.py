"""Smoke test for the pywflab extension module.

Build and run from the repository root:

    cargo build -p wflab-py
    python3 python/smoke_test.py

The script looks for the built library under target/ and loads it as
`pywflab` unless the module is already importable.
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import pywflab

        return pywflab
    except ImportError:
        pass
    for profile in ("release", "debug"):
        for name in ("libpywflab.so", "libpywflab.dylib", "pywflab.dll"):
            path = ROOT / "target" / profile / name
            if path.exists():
                loader = importlib.machinery.ExtensionFileLoader("pywflab", str(path))
                spec = importlib.util.spec_from_file_location("pywflab", path, loader=loader)
                module = importlib.util.module_from_spec(spec)
                loader.exec_module(module)
                return module
    sys.exit("pywflab not found; run `cargo build -p wflab-py` first")


def main():
    wf = load()

    assert abs(wf.profile(0.0) - 0.5) < 1e-15
    assert wf.double_well(0.0) == 0.0 and wf.double_well(1.0) == 0.0
    assert abs(wf.double_well(0.5) - 18.0 / 16.0) < 1e-15

    names = wf.preset_names()
    assert "nine_circles" in names and len(names) >= 8, names

    values, dims, extent, eps = wf.preset_field("nine_circles")
    assert dims == [128, 128] and len(values) == 128 * 128
    assert all(0.0 < v < 1.0 for v in values)

    e = wf.energies(values, dims, extent, eps)
    perimeter = 9 * 2 * math.pi * 0.1
    assert abs(e["h_eps"] - perimeter) / perimeter < 0.03, e["h_eps"]

    topo = wf.topology(values, dims, extent)
    assert topo["inside_face"] == "9" and topo["classification"] == "separate", topo

    values, dims, extent, eps = wf.preset_field("single_circle_r01")
    sim = wf.Simulation("modified", values, dims, extent, eps, dt=5e-6)
    r0 = sim.radius()
    e0 = sim.energy()
    e1 = sim.step(5)
    assert sim.steps == 5 and abs(sim.t - 2.5e-5) < 1e-18
    assert e1 <= e0, (e0, e1)
    assert sim.radius() > r0

    print("pywflab smoke test passed")
    print(f"  presets      {len(names)}")
    print(f"  nine disks   h_eps = {e['h_eps']:.4f} (perimeter {perimeter:.4f})")
    print(f"  modified     E {e0:.4f} -> {e1:.4f}, R {r0:.4f} -> {sim.radius():.4f}")


if __name__ == "__main__":
    main()

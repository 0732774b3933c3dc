#!/usr/bin/env python3
"""Export pretrained feature-net weights into the archive format the
blender loads at runtime.

Produces up to three archives:
  vgg19.wrib        texture/structure losses        (torchvision vgg19)
  inception_v3.wrib evaluation metrics              (torchvision inception_v3)
  lpips_alex.wrib   pair mining distance            (torchvision alexnet
                    + calibration weights from the `lpips` package when
                    installed, uniform channel weights otherwise)

Point the corresponding config keys (vgg_weights, inception_weights,
lpips_weights) at the written files.
"""

import argparse
import struct
import sys
from pathlib import Path

import torch

MAGIC = b"WRIBARCH"
FORMAT_VERSION = 1
WEIGHTS_TAG = "wrib-weights-v1"

DTYPE_CODES = {
    torch.float32: 0,
    torch.float64: 1,
    torch.int64: 2,
    torch.uint8: 3,
    torch.int32: 4,
    torch.int8: 5,
    torch.int16: 6,
    torch.bool: 7,
}


def _write_str(f, s: str) -> None:
    data = s.encode("utf-8")
    f.write(struct.pack("<I", len(data)))
    f.write(data)


def write_archive(path: Path, tag: str, entries: dict) -> None:
    """Serialize name->tensor entries; names are stored sorted so the file
    is byte-reproducible."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        _write_str(f, tag)
        f.write(struct.pack("<Q", len(entries)))
        for name in sorted(entries):
            t = entries[name].detach().cpu().contiguous()
            if t.dtype not in DTYPE_CODES:
                raise ValueError(f"unsupported dtype {t.dtype} for '{name}'")
            _write_str(f, name)
            f.write(struct.pack("<i", DTYPE_CODES[t.dtype]))
            f.write(struct.pack("<I", t.dim()))
            for d in t.shape:
                f.write(struct.pack("<q", d))
            data = t.numpy().tobytes()
            f.write(struct.pack("<Q", len(data)))
            f.write(data)


def vgg_entries(pretrained: bool) -> dict:
    from torchvision.models import vgg19

    weights = "IMAGENET1K_V1" if pretrained else None
    features = vgg19(weights=weights).features
    entries = {}
    for name, value in features.state_dict().items():
        index = int(name.split(".")[0])
        if index <= 22:  # conv1_1 .. relu4_2, all the trunk uses
            entries[f"vgg/trunk.{name}"] = value
    return entries


def inception_entries(pretrained: bool) -> dict:
    from torchvision.models import inception_v3

    weights = "IMAGENET1K_V1" if pretrained else None
    model = inception_v3(weights=weights, aux_logits=True, init_weights=not pretrained)
    entries = {}
    for name, value in model.state_dict().items():
        if name.startswith(("AuxLogits.", "fc.")):
            continue  # classifier heads, unused by the feature extractor
        entries[f"inception/net.0.{name}"] = value
    return entries


LPIPS_TAP_CHANNELS = [64, 192, 384, 256, 256]


def lpips_entries(pretrained: bool) -> dict:
    from torchvision.models import alexnet

    weights = "IMAGENET1K_V1" if pretrained else None
    features = alexnet(weights=weights).features
    entries = {}
    for name, value in features.state_dict().items():
        if int(name.split(".")[0]) <= 11:  # conv1 .. relu5
            entries[f"lpips/trunk.{name}"] = value

    lins = None
    if pretrained:
        try:
            import lpips as lpips_pkg

            net = lpips_pkg.LPIPS(net="alex", spatial=False, verbose=False)
            lins = [net.lins[i].model[1].weight.data.clone() for i in range(5)]
        except ImportError:
            print(
                "note: `lpips` package not installed; writing uniform "
                "calibration weights (pip install lpips for the learned ones)",
                file=sys.stderr,
            )
    if lins is None:
        lins = [torch.full((1, c, 1, 1), 1.0 / c) for c in LPIPS_TAP_CHANNELS]
    for i, lin in enumerate(lins):
        entries[f"lpips/lin{i}"] = lin
    return entries


def selftest(path: Path) -> None:
    """Writes a small archive with fixed contents, for reader compatibility
    checks that must not download anything."""
    entries = {
        "alpha": torch.arange(24, dtype=torch.float32).reshape(2, 3, 4) / 7.0,
        "beta/gamma": torch.tensor([[-1, 0], [1, 2]], dtype=torch.int64),
        "delta": torch.tensor(3.5, dtype=torch.float64),
        "epsilon": torch.tensor([0, 1, 1, 0], dtype=torch.uint8),
    }
    write_archive(path, "selftest-v1", entries)
    print(f"wrote {path}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="weights", help="output directory")
    parser.add_argument(
        "--nets",
        default="vgg,inception,lpips",
        help="comma-separated subset of vgg,inception,lpips",
    )
    parser.add_argument(
        "--random-init",
        action="store_true",
        help="export randomly initialized nets (no downloads; for pipeline tests)",
    )
    parser.add_argument("--selftest", metavar="PATH", help="write a fixed tiny archive and exit")
    args = parser.parse_args()

    if args.selftest:
        selftest(Path(args.selftest))
        return 0

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pretrained = not args.random_init

    builders = {
        "vgg": ("vgg19.wrib", vgg_entries),
        "inception": ("inception_v3.wrib", inception_entries),
        "lpips": ("lpips_alex.wrib", lpips_entries),
    }
    for net in args.nets.split(","):
        net = net.strip()
        if net not in builders:
            parser.error(f"unknown net '{net}'")
        file_name, build = builders[net]
        path = out_dir / file_name
        entries = build(pretrained)
        write_archive(path, WEIGHTS_TAG, entries)
        size_mb = path.stat().st_size / 1e6
        print(f"wrote {path} ({len(entries)} tensors, {size_mb:.1f} MB)")
    return 0


if __name__ == "__main__":
    sys.exit(main())

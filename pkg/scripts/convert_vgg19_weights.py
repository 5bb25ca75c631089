#!/usr/bin/env python3
"""Convert a torchvision-layout VGG19 feature state dict to the extractor archive.

Input: a torch.save file holding the 19-layer feature-stack state dict, keys
either 'features.N.weight' or 'N.weight'. Output: the .npz archive the
FeatureExtractor loads (tensors named 'convS_I.weight'/'convS_I.bias',
float32 little-endian).

Usage: convert_vgg19_weights.py INPUT.pt OUTPUT.npz
"""

import sys

import numpy as np
import torch

# sequential indices of the conv layers in the torchvision feature stack
CONV_INDICES = [0, 2, 5, 7, 10, 12, 14, 16, 19, 21, 23, 25, 28, 30, 32, 34]
STAGE_CONVS = (2, 2, 4, 4, 4)


def layer_names():
    names = []
    for stage, count in enumerate(STAGE_CONVS):
        for i in range(count):
            names.append(f"conv{stage + 1}_{i + 1}")
    return names


def convert(state_dict: dict) -> dict:
    prefix = "features." if any(k.startswith("features.") for k in state_dict) else ""
    out = {}
    for name, idx in zip(layer_names(), CONV_INDICES):
        for part in ("weight", "bias"):
            key = f"{prefix}{idx}.{part}"
            if key not in state_dict:
                raise KeyError(f"missing tensor {key!r} in the input state dict")
            out[f"{name}.{part}"] = state_dict[key].detach().cpu().numpy().astype("<f4")
    return out


def main(argv):
    if len(argv) != 3:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    state = torch.load(argv[1], map_location="cpu", weights_only=True)
    if not isinstance(state, dict):
        print("input must be a state dict", file=sys.stderr)
        return 2
    np.savez(argv[2], **convert(state))
    print(f"wrote {len(CONV_INDICES) * 2} tensors to {argv[2]}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv))

#!/usr/bin/env python3
"""Build the desk-scale MNIST subset in IDX format.

Source: the `mnist` npm package (src/digits/<d>.json), which ships 10000
MNIST digits as pixel/255 values rounded to three decimals. Pixels are
recovered with round(v * 255).

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_desk.py package/src/digits data/mnist-desk
"""
import json
import pathlib
import random
import struct
import sys

N_TRAIN = 2000
N_TEST = 500


def write_idx(prefix, samples):
    images = bytearray(struct.pack(">IIII", 0x00000803, len(samples), 28, 28))
    labels = bytearray(struct.pack(">II", 0x00000801, len(samples)))
    for pixels, label in samples:
        images.extend(pixels)
        labels.append(label)
    pathlib.Path(prefix + "-images-idx3-ubyte").write_bytes(images)
    pathlib.Path(prefix + "-labels-idx1-ubyte").write_bytes(labels)


def main():
    src = pathlib.Path(sys.argv[1])
    out = pathlib.Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    samples = []
    for digit in range(10):
        flat = json.loads((src / f"{digit}.json").read_text())["data"]
        for k in range(len(flat) // 784):
            px = bytes(min(255, max(0, round(v * 255))) for v in flat[k * 784:(k + 1) * 784])
            samples.append((px, digit))
    random.Random(20240101).shuffle(samples)
    write_idx(str(out / "train"), samples[:N_TRAIN])
    write_idx(str(out / "test"), samples[N_TRAIN:N_TRAIN + N_TEST])


if __name__ == "__main__":
    main()

"""Exports a tiny 1000-way "classifier" (global average pool + linear) to
ONNX, plus a 299x299 test image and torch's output on it.

    python3 make_onnx_fixture.py <out-dir>
"""
import json
import os
import sys

import numpy as np
import torch
from PIL import Image


class Tiny(torch.nn.Module):
    def __init__(self):
        super().__init__()
        self.pool = torch.nn.AdaptiveAvgPool2d(1)
        self.fc = torch.nn.Linear(3, 1000)

    def forward(self, x):
        return self.fc(torch.flatten(self.pool(x), 1))


def main(out):
    os.makedirs(out, exist_ok=True)
    torch.manual_seed(0)
    model = Tiny().eval()
    x = torch.zeros(1, 3, 299, 299)
    torch.onnx.export(model, x, os.path.join(out, "tiny_classifier.onnx"), opset_version=11,
                      input_names=["input"], output_names=["logits"], dynamo=False)
    yy, xx = np.mgrid[0:299, 0:299]
    img = np.stack([(xx * 255) // 298, (yy * 255) // 298, ((xx + yy) * 255) // 596], axis=-1).astype(np.uint8)
    Image.fromarray(img, "RGB").save(os.path.join(out, "gradient_299.png"))
    t = torch.from_numpy(img.astype(np.float32) / 127.5 - 1.0).permute(2, 0, 1).unsqueeze(0)
    with torch.no_grad():
        y = model(t)[0].numpy().astype(float)
    with open(os.path.join(out, "tiny_classifier_golden.json"), "w") as f:
        json.dump({"image": "gradient_299.png", "first": y[:10].tolist(), "sum": float(y.sum()),
                   "weight": model.fc.weight.detach().numpy().astype(float).tolist(),
                   "bias": model.fc.bias.detach().numpy().astype(float).tolist()}, f)


if __name__ == "__main__":
    main(sys.argv[1])

"""KL training loop over the four head distributions, plus evaluation."""

from __future__ import annotations

import argparse
import csv
import json
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch.utils.data import DataLoader

from .data import HEADS, CropDataset, load_dataset
from .model import CalibNet

MIN_TRAIN_SAMPLES = 200


def kl_head_loss(logits: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean KL(target || softmax(logits)) over the batch."""
    return F.kl_div(F.log_softmax(logits, dim=-1), target, reduction="batchmean")


def _collate(batch):
    images = torch.from_numpy(np.stack([b[0] for b in batch]))
    targets = {
        h: torch.from_numpy(np.stack([b[1][h] for b in batch])) for h in HEADS
    }
    return images, targets


def train(
    dataset: CropDataset,
    epochs: int = 2,
    lr: float = 2e-3,
    batch_size: int = 64,
    seed: int = 0,
) -> tuple[CalibNet, list[dict]]:
    """Train the net, returning it plus per-epoch mean KL per head.

    Deterministic under a fixed seed up to framework nondeterminism flags.
    """
    if len(dataset) < MIN_TRAIN_SAMPLES:
        raise ValueError(
            f"need at least {MIN_TRAIN_SAMPLES} samples, got {len(dataset)}"
        )
    torch.manual_seed(seed)
    model = CalibNet({h: dataset.layouts[h].n_bins for h in HEADS})
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    loader = DataLoader(
        dataset,
        batch_size=batch_size,
        shuffle=True,
        collate_fn=_collate,
        generator=torch.Generator().manual_seed(seed),
        num_workers=0,
    )
    metrics: list[dict] = []
    for epoch in range(1, epochs + 1):
        model.train()
        sums = {h: 0.0 for h in HEADS}
        batches = 0
        for images, targets in loader:
            opt.zero_grad()
            logits = model(images)
            losses = {h: kl_head_loss(logits[h], targets[h]) for h in HEADS}
            total = sum(losses.values())
            total.backward()
            opt.step()
            for h in HEADS:
                sums[h] += float(losses[h].detach())
            batches += 1
        row = {"epoch": epoch}
        row.update({f"kl_{h}": sums[h] / batches for h in HEADS})
        row["kl_total"] = sum(sums[h] for h in HEADS) / batches
        metrics.append(row)
    return model, metrics


@torch.no_grad()
def predict_values(model: CalibNet, dataset: CropDataset, batch_size: int = 128):
    """Decode argmax-center predictions for every head and sample."""
    model.eval()
    out = {h: [] for h in HEADS}
    for start in range(0, len(dataset), batch_size):
        idx = range(start, min(start + batch_size, len(dataset)))
        images = torch.from_numpy(dataset.images[idx.start : idx.stop])
        logits = model(images)
        for h in HEADS:
            probs = F.softmax(logits[h], dim=-1).numpy()
            layout = dataset.layouts[h]
            out[h].extend(layout.decode_argmax(p) for p in probs)
    return {h: np.asarray(v) for h, v in out.items()}


def write_metrics_csv(metrics: list[dict], path: str | Path) -> None:
    fields = ["epoch"] + [f"kl_{h}" for h in HEADS] + ["kl_total"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(metrics)


def main() -> None:
    parser = argparse.ArgumentParser(description="Train the toy calibration net.")
    parser.add_argument("--manifest", required=True)
    parser.add_argument("--bins", required=True)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--epochs", type=int, default=2)
    parser.add_argument("--lr", type=float, default=2e-3)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--input-side", type=int, default=64)
    parser.add_argument("--split", default="train")
    args = parser.parse_args()

    dataset = load_dataset(
        args.manifest, args.bins, input_side=args.input_side, split=args.split
    )
    model, metrics = train(
        dataset, epochs=args.epochs, lr=args.lr,
        batch_size=args.batch_size, seed=args.seed,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(metrics, out_dir / "metrics.csv")
    torch.save(model.state_dict(), out_dir / "model.pt")
    (out_dir / "run.json").write_text(
        json.dumps({"samples": len(dataset), "epochs": args.epochs, "lr": args.lr})
    )
    print(f"trained on {len(dataset)} crops; final KL {metrics[-1]['kl_total']:.4f}")


if __name__ == "__main__":
    main()

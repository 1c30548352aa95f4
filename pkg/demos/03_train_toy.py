"""Train the character transformer on the bundled toy corpus.

A small encoder memorizes the 32-sentence corpus in a couple of minutes
of CPU time; this demo runs a shortened schedule and then dots a held-out
plain sentence with the best checkpoint.
"""

import tempfile

from nikudkit import data
from nikudkit.checkpoint import load_checkpoint, save_checkpoint
from nikudkit.corpus import build_chunks, load_manifest, tier_partition
from nikudkit.hebrew import compose
from nikudkit.model import Model, ModelConfig, alphabet_from_chunks
from nikudkit.training import TrainConfig, evaluate_on, train_curriculum

entries = load_manifest(data.path("toy/manifest.tsv"))
train_chunks = build_chunks([e for e in entries if e.split == "train"], max_len=64)
dev_chunks = build_chunks([e for e in entries if e.split == "dev"], max_len=64)

config = ModelConfig(alphabet=alphabet_from_chunks(train_chunks + dev_chunks),
                     d_model=64, n_layers=2, n_heads=4, neck_hidden=256,
                     max_len=64)
model = Model.init(config, seed=0)

# curriculum: oldest tier first, most modern last, dev scored every epoch
train_cfg = TrainConfig(peak_lr=3e-3, warmup_frac=0.2, batch_size=8,
                        epochs_per_tier=40, seed=0)
best, log = train_curriculum(model, tier_partition(train_chunks),
                             dev_chunks, train_cfg)

for rec in log.epochs[::5]:
    print(f"{rec.phase} epoch {rec.epoch:2d}  loss {rec.mean_loss:.3f}  "
          f"dev WOR {rec.wor:.3f}  VOC {rec.voc:.3f}")
print("best dev WOR:", log.epochs[log.best_epoch].wor)

train_score = evaluate_on(best, train_chunks)
print(f"train-set DEC {train_score.dec:.3f}  WOR {train_score.wor:.3f}")

with tempfile.NamedTemporaryFile(suffix=".ckpt") as fh:
    save_checkpoint(best, fh.name)
    reloaded = load_checkpoint(fh.name)
print("checkpoint round trip ok")

plain = "הילד אכל לחם היום"
print("dot:", plain, "->", compose(reloaded.predict(plain)))

"""Gallery of the eight synthetic laundering shapes and what the detectors report.

    python3 notebooks/02_typology_gallery.py
"""

from amlreason.kinds import LAUNDERING_KINDS
from amlreason.serialize import serialize
from amlreason.typology import GenConfig, detect, detected_kinds, generate, generate_benign

# there is no rule for "random"; at best the detectors name a sub-shape it happens to contain
for kind in LAUNDERING_KINDS:
    sub = generate(GenConfig(kind, fan=3, seed=4))
    found = [k.value for k in detected_kinds(detect(sub))]
    print(f"{kind.value:15s} accounts={len(sub.accounts):2d} transfers={len(sub.transfers):2d} detected={found}")

benign = generate_benign(seed=4)
print(f"{'benign':15s} accounts={len(benign.accounts):2d} transfers={len(benign.transfers):2d} "
      f"detected={[k.value for k in detected_kinds(detect(benign))]}")

# %% one example in full
print()
print(serialize(generate(GenConfig(LAUNDERING_KINDS[0], fan=3, seed=4)), True))

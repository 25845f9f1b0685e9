"""
Auditing the closed forms
=========================

Compare the per-case closed-form JM against the exact wedge IoU over random
wedges, and check each printed fraction against its reduced form.
"""

from chainseg.errata import errata_report, to_markdown

report = errata_report(trials=5000, seed=0)
print(to_markdown(report))

# The nested example: both chains are circles of radius 1 and 2.
ex = report["worked_example"]
print("closed form", round(ex["paper_jm"], 4), "exact", round(ex["exact_iou"], 4))

"""
Adversary harness. Submodules are imported directly; `child` also runs as
`python -m rollguard.harness.child` and is kept out of the package namespace.
"""

"""The four synchronization policies and what each semaphore means.

A policy maps producer tiles to semaphores (post side) and consumer k-steps
to (semaphore, expected value) observations (wait side). Coarser policies
need fewer semaphore operations; finer ones release consumers earlier.
"""

from tilesync_sim import (Conv2DTileSync, Dim3, RowSync, StridedSync,
                          TileCoord, TileSync, build_dep_dag, build_preset,
                          consumer_wait, post_target, sem_count, wait_steps)

grid = Dim3(3, 4, 1)  # producer: 3 rows x 4 column tiles
print(f"Producer grid {grid}: {grid.total()} tiles\n")

for policy, k_steps in ((TileSync(), 4), (RowSync(), 4),
                        (StridedSync(2), 1), (Conv2DTileSync(9), 36)):
    name = type(policy).__name__
    n = sem_count(policy, grid)
    steps = wait_steps(policy, k_steps)
    print(f"{name}: {n} semaphores, consumer waits at k-steps {list(steps)}")
    tile = TileCoord(1, 2, 0)
    print(f"  producer tile (1,2) posts to semaphore "
          f"{post_target(policy, tile, grid)}")
    w = consumer_wait(policy, TileCoord(1, 2, 0), steps[0], grid, 1)
    print(f"  consumer tile (1,2) first wait: semaphore {w.sem_index} "
          f"until it reaches {w.expected}\n")

print("""Strided grouping in the attention chain: the first GeMM's output
splits into three slices laid out side by side, and the dot-product tile for
column j needs tile j of every slice. Tiles a stride apart share a semaphore
and the producer computes each group consecutively:
""")

sc = build_preset("attn:toy")
dag = build_dep_dag(sc)
for j in range(2):
    needed = sorted(dag.producers_of("dot", 0, j, 0))
    cols = [y for _, _, y in needed]
    print(f"  dot tile {j} <- first-GeMM columns {cols}")
for j in range(3):
    needed = sorted(dag.producers_of("out", 0, j, 0)
                    | dag.producers_of("out", 0, j, 1))
    print(f"  output tile {j} <- dot tiles {[y for _, _, y in needed]}")

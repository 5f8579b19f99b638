"""Stream synchronization vs fine-grained tile synchronization.

Two dependent 6-block kernels on a 4-SM device. Under stream sync the
consumer kernel cannot start until every producer block has finished, so the
two half-empty final waves cost four waves in total. With per-row semaphores
the consumer's first blocks start as soon as their producer row is done and
the pair finishes in three fully occupied waves.
"""

from tilesync_sim import Mode, build_preset, simulate


def slot_timeline(trace, makespan, num_slots=4, cell=6):
    """Render which block occupies each slot over time."""
    # Reconstruct slot occupancy: blocks take a free slot at their
    # scheduled event and release it at their finished event.
    spans = {}
    for ev in trace.events:
        key = (ev.stage, ev.tb)
        if ev.kind == "scheduled":
            spans[key] = [ev.time, None, ev.tile]
        elif ev.kind == "finished":
            spans[key][1] = ev.time
    free_at = [0] * num_slots
    rows = [[] for _ in range(num_slots)]
    for (stage, tb), (start, end, tile) in spans.items():
        slot = next(s for s in range(num_slots) if free_at[s] <= start)
        label = f"{stage[0].upper()}{tile[0]}{tile[1]}"
        rows[slot].append((start, end, label))
        free_at[slot] = end
    width = int(makespan // cell)
    for slot in range(num_slots):
        cells = ["." * 4] * width
        for start, end, label in rows[slot]:
            for t in range(int(start // cell), int(end // cell)):
                cells[t] = label.ljust(4)
        print(f"  SM-{slot}  " + " ".join(cells))


for mode in (Mode.STREAM, Mode.FINE):
    sc = build_preset("fig2", policy="row", mode=mode)
    trace, m = simulate(sc)
    print(f"=== {mode.value} mode: {m.generations} waves, "
          f"makespan {m.makespan} units")
    slot_timeline(trace, m.makespan)
    print()

print("""Block names are <kernel><row><col>: P.. producer, C.. consumer.
In stream mode waves 2 and 4 run half empty. In fine mode the producer's
last two blocks share wave 2 with consumer blocks whose rows are already
complete, and all twelve blocks finish a full wave earlier.""")

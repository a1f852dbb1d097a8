"""A guided tour of the kitchen gridworld.

Chef 0 follows a hand-written script on the small cramped layout: fetch
three onions, fill the pot, wait out the cook timer, plate the soup, and
deliver it, while chef 1 steps out of the way and then idles. The demo
renders the grid at the interesting ticks and shows how the reward
streams decompose: the team stream pays 20 per delivery, the per-chef
shaped streams add +3 per onion placed into a pot and charge the idle
partner -20 when the other chef delivers.

Run:  python3 demos/01_kitchen_tour.py
"""

from pasd import kitchen as K

U, D, L, R, S, I = K.UP, K.DOWN, K.LEFT, K.RIGHT, K.STAY, K.INTERACT

# chef 0 shuttles between the onion source (faced from (1,1)) and the pot
# (faced from (1,2)); chef 1 moves to (2,3) and parks there
ONION_RUN = [(U, S), (I, S), (R, S), (U, S), (I, S), (L, S)]
SCRIPT = (
    [(S, R), (S, D)]
    + ONION_RUN + ONION_RUN + ONION_RUN[:5]   # third placement starts the cook
    + [(R, S), (U, S), (I, S)]                # fetch a dish from the rack
    + [(L, S), (U, S), (I, S)]                # back at the pot, too early
    + [(S, S)] * 13                           # wait out the timer
    + [(I, S)]                                # soup comes off the heat
    + [(D, S), (L, S), (I, S)]                # carry it to the serving window
)


def main() -> None:
    layout = K.load_layout("cramped_small")
    state = K.reset(layout)
    print(f"layout {layout.name!r}: {len(layout.grid[0])}x{len(layout.grid)} "
          f"grid, pot cooks in {layout.cook_time} ticks\n")
    print(K.render_text(layout, state))

    team = 0.0
    shaped = [0.0, 0.0]
    for t, joint in enumerate(SCRIPT, start=1):
        state, r, sh, events = K.step(layout, state, joint)
        team += r
        shaped[0] += sh[0]
        shaped[1] += sh[1]
        for e in events:
            print(f"tick {t:2d}: {e.kind} (chef {e.chef})")
        if any(e.kind in ("cooking_started", "soup_pickup", "delivery")
               for e in events):
            print(K.render_text(layout, state))

    print(f"after {len(SCRIPT)} ticks:")
    print(f"  team reward   {team:6.1f}   (20 per delivered soup)")
    print(f"  shaped chef 0 {shaped[0]:6.1f}   (+3 per onion into the pot)")
    print(f"  shaped chef 1 {shaped[1]:6.1f}   (delivery they took no part in)")


if __name__ == "__main__":
    main()

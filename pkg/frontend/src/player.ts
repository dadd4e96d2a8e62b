// Frame-accurate player state. The current frame is derived from playback
// time multiplied by fps; explicit frame-step controls move exactly one
// frame. Codec-level frame seeking is best effort: we seek the <video> to
// the frame midpoint and treat the computed index as authoritative.

export type PlaybackRate = 0 | 0.5 | 1.0;

export interface TrimWindow {
  startFrame: number;
  endFrame: number;
}

export class PlayerState {
  private frame = 0;
  private playbackRate: PlaybackRate = 0;
  private trim: TrimWindow | null = null;

  constructor(
    public readonly fps: number,
    public readonly frameCount: number,
  ) {
    if (fps <= 0) throw new Error("fps must be positive");
    if (frameCount < 1) throw new Error("frameCount must be >= 1");
  }

  get currentFrame(): number {
    return this.frame;
  }

  get rate(): PlaybackRate {
    return this.playbackRate;
  }

  get paused(): boolean {
    return this.playbackRate === 0;
  }

  get trimWindow(): TrimWindow | null {
    return this.trim;
  }

  private lowerBound(): number {
    return this.trim ? this.trim.startFrame : 0;
  }

  private upperBound(): number {
    return this.trim ? Math.min(this.trim.endFrame, this.frameCount - 1) : this.frameCount - 1;
  }

  private clamp(frame: number): number {
    return Math.min(Math.max(frame, this.lowerBound()), this.upperBound());
  }

  play(): void {
    this.playbackRate = 1.0;
  }

  playHalfSpeed(): void {
    this.playbackRate = 0.5;
  }

  pause(): void {
    this.playbackRate = 0;
  }

  toggleHalfSpeed(): void {
    this.playbackRate = this.playbackRate === 0.5 ? 1.0 : 0.5;
  }

  stepFrame(direction: 1 | -1): number {
    this.playbackRate = 0;
    const next = this.clamp(this.frame + direction);
    this.frame = next;
    return next;
  }

  seekToFrame(frame: number): number {
    this.frame = this.clamp(Math.round(frame));
    return this.frame;
  }

  // sync from a media element's clock
  syncFromTime(seconds: number): number {
    this.frame = this.clamp(Math.floor(seconds * this.fps + 1e-6));
    return this.frame;
  }

  timeForCurrentFrame(): number {
    // midpoint of the frame interval: robust against codec rounding
    return (this.frame + 0.5) / this.fps;
  }

  setTrimWindow(window: TrimWindow | null): void {
    if (window && (window.startFrame < 0 || window.endFrame <= window.startFrame)) {
      throw new Error("trim window must have endFrame > startFrame >= 0");
    }
    this.trim = window;
    if (window) this.frame = this.clamp(window.startFrame);
  }
}
